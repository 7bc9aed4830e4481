use clap::{Parser, Subcommand};
use endscatter::config::{load_model, parse_lambda_list, ExperimentConfig, GridSpec, Task};
use endscatter::experiment::run;
use endscatter::Result;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "endscatter",
    version,
    about = "Stationary scattering on manifolds with ends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its JSON and CSV artifacts.
    Run(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// JSON configuration; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON file, or a shorthand such as `parabolic(0.5)`.
    #[arg(long)]
    model: Option<String>,
    /// verify, resolve, dft, smatrix, benchmark1d or counterexample.
    #[arg(long)]
    task: Option<Task>,
    /// Energies: `0.5,1,2` or `a:b:n`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// `n=<int>,Rmax=<float>`.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Mode truncation (angular states for the counterexample).
    #[arg(long)]
    modes: Option<usize>,
    /// Exit with status 3 when any diagnostic is flagged.
    #[arg(long)]
    strict: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn build_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => {
            let task = a.task.ok_or_else(|| {
                endscatter::Error::Config("--task is required without --config".into())
            })?;
            ExperimentConfig::new(task, None, vec![])
        }
    };
    if let Some(t) = a.task {
        cfg.task = t;
    }
    if let Some(m) = &a.model {
        cfg.model = Some(load_model(m)?);
    }
    if let Some(l) = &a.lambda {
        cfg.lambdas = parse_lambda_list(l)?;
    }
    if a.grid.is_some() {
        cfg.grid = a.grid;
    }
    if a.modes.is_some() {
        cfg.modes = a.modes;
    }
    cfg.strict |= a.strict;
    cfg.out = a.out.clone();
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let outcome = build_config(&args).and_then(|cfg| run(&cfg));
    match outcome {
        Ok(o) => {
            for p in &o.artifacts {
                println!("wrote {}", p.display());
            }
            for f in &o.flags {
                eprintln!("flag: {f}");
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
