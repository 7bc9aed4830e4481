//! Runs a configured experiment and writes its artifacts.
//!
//! Every JSON artifact is an envelope carrying the task, the configuration
//! hash, the conventions fixing `r0` and `G`, the flags raised by the run and
//! the task result. Nothing in the pipeline is random and no timestamps are
//! written, so repeated runs produce byte-identical files.

use crate::config::{
    benchmark_well, ExperimentConfig, Task, DEFAULT_ANGULAR_NODES, DEFAULT_H, DEFAULT_H_PARABOLIC,
};
use crate::counterexample::{
    residual_decay, wkb_failure_demos, Ansatz, DemoSettings, FailureReport, ParabolicModel,
    ResidualDecay,
};
use crate::fourier::{transform_solution, xi_trace, DFTResult};
use crate::geometry::{
    critical_energy, liouville_identity_defect, verify_conditions, ConditionReport, LineGeometry,
    ManifoldModel, Sign,
};
use crate::modes::ModeFunction;
use crate::modes::{build_mode_basis, default_mode_count, ModeBasis};
use crate::smatrix::{
    benchmark_1d, build_smatrix, write_benchmark_csv, BenchmarkGrid, ScatteringMatrix,
};
use crate::solver::{
    mode_system, radiation_residual, solve_resolvent, BoundaryCondition, LineGrid,
    RadiationResidual, SourceSpec,
};
use crate::{Error, Result, C64};
use nalgebra::DVector;
use serde::Serialize;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

/// Exit status of a completed run.
pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Conventions {
    /// Reference radius of each end; boundary data are phase-normalized there.
    pub r0: Vec<f64>,
    #[serde(rename = "G")]
    pub g: String,
}

pub fn conventions(model: Option<&ManifoldModel>) -> Conventions {
    match model {
        Some(m) if m.is_parabolic() => Conventions {
            r0: m.ends.iter().map(|e| e.r0).collect(),
            g: "l2 over the Dirichlet eigenbasis of the angular operator H_D, measure dtheta"
                .into(),
        },
        Some(m) => Conventions {
            r0: m.ends.iter().map(|e| e.r0).collect(),
            g: "l2 of angular mode coefficients at r0, basis orthonormal in the induced measure"
                .into(),
        },
        None => Conventions {
            r0: vec![],
            g: "l2 of plane-wave amplitudes on the two ends of the line".into(),
        },
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    task: Task,
    config_hash: &'a str,
    conventions: &'a Conventions,
    config: &'a ExperimentConfig,
    flags: &'a [String],
    result: T,
}

struct Writer<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
    conventions: Conventions,
    artifacts: Vec<PathBuf>,
}

impl Writer<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.cfg.out.join(name);
        self.artifacts.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, flags: &[String], result: T) -> Result<()> {
        let env = Envelope {
            task: self.cfg.task,
            config_hash: &self.hash,
            conventions: &self.conventions,
            config: self.cfg,
            flags,
            result,
        };
        let text = serde_json::to_string_pretty(&env)?;
        let p = self.path(name);
        fs::write(p, text + "\n")?;
        Ok(())
    }

    fn csv(&mut self, name: &str) -> Result<BufWriter<File>> {
        let p = self.path(name);
        Ok(BufWriter::new(File::create(p)?))
    }
}

/// Validates, runs and writes artifacts into `cfg.out`. Validation problems
/// come back as errors (exit code 2); non-converged diagnostics become flags,
/// and in strict mode exit code 3.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let model = cfg.effective_model();
    if cfg.task.is_radiation() {
        let m = model.as_ref().expect("validated");
        let ce = critical_energy(m)?;
        let floor = ce.lambda0 + cfg.tolerances.lambda_margin;
        if let Some(l) = cfg.lambdas.iter().find(|l| **l <= floor) {
            return Err(Error::Spectral(format!(
                "lambda = {l} does not exceed lambda0 + margin = {floor}"
            )));
        }
    }
    fs::create_dir_all(&cfg.out)?;
    let mut w = Writer {
        cfg,
        hash: cfg.hash(),
        conventions: conventions(model.as_ref()),
        artifacts: vec![],
    };
    let flags = match cfg.task {
        Task::Verify => verify(&mut w, model.as_ref().expect("validated"))?,
        Task::Resolve => resolve(&mut w, model.as_ref().expect("validated"))?,
        Task::Dft => dft_task(&mut w, model.as_ref().expect("validated"))?,
        Task::Smatrix => smatrix(&mut w, model.as_ref().expect("validated"))?,
        Task::Benchmark1d => benchmark(&mut w, model.as_ref())?,
        Task::Counterexample => counterexample(&mut w, model.as_ref().expect("validated"))?,
    };
    let exit_code = if cfg.strict && !flags.is_empty() {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_OK
    };
    Ok(RunOutcome {
        exit_code,
        artifacts: w.artifacts,
        flags,
    })
}

fn verify(w: &mut Writer, model: &ManifoldModel) -> Result<Vec<String>> {
    let rep = verify_conditions(model)?;
    let flags: Vec<String> = rep
        .diagnostics
        .iter()
        .filter(|d| d.low_confidence)
        .map(|d| format!("end {}: {} fit is low confidence", d.end, d.quantity))
        .collect();
    let mut flags = flags;
    // only single warped ends carry the identity
    let liouville_defect = liouville_identity_defect(model, 64, 8).ok();
    if let Some(d) = liouville_defect.filter(|d| *d > LIOUVILLE_TOL) {
        flags.push(format!(
            "Liouville identity defect {d:.3e} above {LIOUVILLE_TOL:e}"
        ));
    }
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        report: &'a ConditionReport,
        liouville_defect: Option<f64>,
    }
    w.json(
        "verify.json",
        &flags,
        Out {
            report: &rep,
            liouville_defect,
        },
    )?;
    Ok(flags)
}

const LIOUVILLE_TOL: f64 = 1e-10;

/// Grids at or below this size also get a dense LU oracle in the resolve task.
pub const DENSE_ORACLE_NODES: usize = 200;

/// Solver invariants for one source at one energy.
#[derive(Clone, Debug, Serialize)]
pub struct ResolventChecks {
    /// `|<p, R(lambda + i0) psi> - <R(lambda - i0) p, psi>|`, relative, for
    /// the probe `p = (1 + i x / X) psi`.
    pub adjoint_gap: f64,
    /// Smallest `Im <psi, R(z) psi>` over the radiation solve and damped
    /// energies `lambda + i gamma`.
    pub herglotz_min_im: f64,
    /// Largest relative gap to a dense LU solve of every mode system.
    pub dense_oracle_gap: Option<f64>,
}

fn resolvent_checks(
    s: &LineSetup,
    psi: &ModeFunction,
    phi: &ModeFunction,
    lambda: f64,
) -> Result<ResolventChecks> {
    let z = C64::new(lambda, 0.0);
    // a complex probe, so the adjoint pairing is not fixed by conjugation symmetry
    let mut probe = psi.clone();
    let nodes = s.grid.nodes();
    let span = nodes.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    for u in probe.u.iter_mut() {
        for (v, x) in u.iter_mut().zip(&nodes) {
            *v *= C64::new(1.0, x / span);
        }
    }
    let back = solve_resolvent(
        &s.geom,
        &s.basis,
        &s.grid,
        &probe,
        z,
        BoundaryCondition::RadiationIncoming,
    )?
    .phi;
    let lhs = probe.inner(phi)?;
    let rhs = back.inner(psi)?;
    let adjoint_gap = (lhs - rhs).norm() / lhs.norm().max(f64::MIN_POSITIVE);
    let mut herglotz_min_im = psi.inner(phi)?.im;
    for gamma in [1e-3, 1e-1, 10.0] {
        let r = solve_resolvent(
            &s.geom,
            &s.basis,
            &s.grid,
            psi,
            C64::new(lambda, gamma),
            BoundaryCondition::Damped,
        )?;
        herglotz_min_im = herglotz_min_im.min(psi.inner(&r.phi)?.im);
    }
    let dense_oracle_gap = if s.grid.n <= DENSE_ORACLE_NODES {
        let mut gap = 0.0f64;
        for (mi, u) in phi.u.iter().enumerate() {
            let sys = mode_system(
                &s.geom,
                &s.grid,
                s.basis.nu(mi),
                z,
                BoundaryCondition::RadiationOutgoing,
            )?;
            let b = DVector::from_iterator(
                sys.mass.len(),
                sys.mass
                    .iter()
                    .enumerate()
                    .map(|(j, m)| psi.u[mi][j + sys.first] * *m),
            );
            let x =
                sys.matrix.to_dense().lu().solve(&b).ok_or_else(|| {
                    Error::Resolution("dense oracle: singular mode system".into())
                })?;
            let scale = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            let diff = x
                .iter()
                .zip(&u[sys.first..])
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            gap = gap.max(diff / scale);
        }
        Some(gap)
    } else {
        None
    };
    Ok(ResolventChecks {
        adjoint_gap,
        herglotz_min_im,
        dense_oracle_gap,
    })
}

struct LineSetup {
    geom: LineGeometry,
    basis: ModeBasis,
    grid: LineGrid,
}

fn line_setup(cfg: &ExperimentConfig, model: &ManifoldModel) -> Result<LineSetup> {
    let geom = LineGeometry::new(model)?;
    let lmax = cfg.lambdas.iter().cloned().fold(0.0, f64::max);
    let m = match cfg.modes {
        Some(m) => m,
        None => default_mode_count(model, lmax)?,
    };
    let basis = build_mode_basis(model, m)?;
    let grid = match cfg.grid {
        Some(g) => LineGrid::with_points(&geom, g.n)?,
        None => LineGrid::new(&geom, DEFAULT_H)?,
    };
    Ok(LineSetup { geom, basis, grid })
}

/// Unit plateau just beyond the wall for single ends, a unit Gaussian at the
/// neck for glued ends; lowest mode.
fn default_source(model: &ManifoldModel, basis: &ModeBasis) -> SourceSpec {
    let mode = basis.labels()[0];
    if model.ends.len() == 1 {
        let r0 = model.ends[0].r0;
        SourceSpec::ShellBump {
            r_lo: r0 + 2.0,
            r_hi: r0 + 4.0,
            end: 0,
            mode,
        }
    } else {
        SourceSpec::Gaussian {
            center: 0.0,
            width: 1.0,
            mode,
        }
    }
}

#[derive(Serialize)]
struct ResolveEntry {
    lambda: f64,
    z: C64,
    max_residual: f64,
    residual: Vec<f64>,
    radiation: RadiationResidual,
    invariants: ResolventChecks,
    solution_csv: String,
}

fn resolve(w: &mut Writer, model: &ManifoldModel) -> Result<Vec<String>> {
    let cfg = w.cfg;
    let s = line_setup(cfg, model)?;
    let src = cfg
        .source
        .clone()
        .unwrap_or_else(|| default_source(model, &s.basis));
    let psi = src.build(&s.geom, &s.grid, &s.basis.labels())?;
    let mut flags = vec![];
    let mut entries = vec![];
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        let z = C64::new(lambda, 0.0);
        let sol = solve_resolvent(
            &s.geom,
            &s.basis,
            &s.grid,
            &psi,
            z,
            BoundaryCondition::RadiationOutgoing,
        )?;
        let name = format!("resolve_{i}.csv");
        sol.phi.write_csv(w.csv(&name)?)?;
        if sol.max_residual() > cfg.tolerances.residual {
            flags.push(format!(
                "lambda = {lambda}: residual {:.3e} above tolerance",
                sol.max_residual()
            ));
        }
        let radiation = radiation_residual(&sol, &s.geom, &s.basis, cfg.radiation_beta, None)?;
        let invariants = resolvent_checks(&s, &psi, &sol.phi, lambda)?;
        let tol = cfg.tolerances.residual;
        if invariants.adjoint_gap > tol || invariants.dense_oracle_gap.is_some_and(|g| g > tol) {
            flags.push(format!(
                "lambda = {lambda}: resolvent invariants off by more than {tol:e}"
            ));
        }
        if invariants.herglotz_min_im < 0.0 {
            flags.push(format!(
                "lambda = {lambda}: Im <psi, R psi> = {:.3e} < 0",
                invariants.herglotz_min_im
            ));
        }
        entries.push(ResolveEntry {
            lambda,
            z,
            max_residual: sol.max_residual(),
            residual: sol.residual.clone(),
            radiation,
            invariants,
            solution_csv: name,
        });
    }
    #[derive(Serialize)]
    struct Out<'a> {
        source: &'a SourceSpec,
        grid: &'a LineGrid,
        labels: Vec<i64>,
        solves: Vec<ResolveEntry>,
    }
    w.json(
        "resolve.json",
        &flags,
        Out {
            source: &src,
            grid: &s.grid,
            labels: s.basis.labels(),
            solves: entries,
        },
    )?;
    Ok(flags)
}

fn sign_name(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "plus",
        Sign::Minus => "minus",
    }
}

fn dft_task(w: &mut Writer, model: &ManifoldModel) -> Result<Vec<String>> {
    let cfg = w.cfg;
    let s = line_setup(cfg, model)?;
    let src = cfg
        .source
        .clone()
        .unwrap_or_else(|| default_source(model, &s.basis));
    let psi = src.build(&s.geom, &s.grid, &s.basis.labels())?;
    let mut flags = vec![];
    let mut results: Vec<DFTResult> = vec![];
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        for sign in [Sign::Plus, Sign::Minus] {
            let bc = BoundaryCondition::radiation(sign);
            let sol = solve_resolvent(&s.geom, &s.basis, &s.grid, &psi, C64::new(lambda, 0.0), bc)?;
            let d = transform_solution(&s.geom, &sol, lambda, sign)?;
            xi_trace(&s.geom, &sol, lambda, sign)?
                .write_csv(w.csv(&format!("xi_{i}_{}.csv", sign_name(sign)))?)?;
            if !d.converged || d.cauchy > cfg.tolerances.cauchy {
                flags.push(format!(
                    "lambda = {lambda}, {}: windowed limit not converged (cauchy {:.3e})",
                    sign_name(sign),
                    d.cauchy
                ));
            }
            results.push(d);
        }
    }
    #[derive(Serialize)]
    struct Out<'a> {
        source: &'a SourceSpec,
        grid: &'a LineGrid,
        transforms: Vec<DFTResult>,
    }
    w.json(
        "dft.json",
        &flags,
        Out {
            source: &src,
            grid: &s.grid,
            transforms: results,
        },
    )?;
    Ok(flags)
}

fn smatrix(w: &mut Writer, model: &ManifoldModel) -> Result<Vec<String>> {
    let cfg = w.cfg;
    let s = line_setup(cfg, model)?;
    let mut flags = vec![];
    let mut out: Vec<ScatteringMatrix> = vec![];
    for &lambda in &cfg.lambdas {
        let sm = build_smatrix(&s.geom, &s.basis, &s.grid, lambda)?;
        if !sm.converged {
            flags.push(format!(
                "lambda = {lambda}: scattering columns not converged"
            ));
        }
        if sm.unitarity_defect > cfg.tolerances.unitarity {
            flags.push(format!(
                "lambda = {lambda}: unitarity defect {:.3e} above tolerance",
                sm.unitarity_defect
            ));
        }
        if sm.near_threshold {
            flags.push(format!(
                "lambda = {lambda}: a propagating mode is near threshold"
            ));
        }
        out.push(sm);
    }
    #[derive(Serialize)]
    struct Out<'a> {
        grid: &'a LineGrid,
        matrices: Vec<ScatteringMatrix>,
    }
    w.json(
        "smatrix.json",
        &flags,
        Out {
            grid: &s.grid,
            matrices: out,
        },
    )?;
    Ok(flags)
}

fn benchmark(w: &mut Writer, model: Option<&ManifoldModel>) -> Result<Vec<String>> {
    let cfg = w.cfg;
    let (depth, half_width) = match model {
        Some(m) => benchmark_well(m)?,
        None => (1.0, 1.0),
    };
    let mut grid = BenchmarkGrid::default();
    if let Some(m) = model {
        let r = m.ends[0].r_max;
        grid.x_max = (r * r - m.smoothing_width * m.smoothing_width).sqrt();
    }
    if let Some(g) = cfg.grid {
        grid.h = 2.0 * grid.x_max / (g.n - 1) as f64;
    }
    let rows = benchmark_1d(&cfg.lambdas, depth, half_width, grid)?;
    write_benchmark_csv(&rows, w.csv("benchmark1d.csv")?)?;
    let flags: Vec<String> = rows
        .iter()
        .filter(|r| !r.converged || r.unitarity_defect > cfg.tolerances.unitarity)
        .map(|r| format!("lambda = {}: benchmark row not converged", r.lambda))
        .collect();
    #[derive(Serialize)]
    struct Out<'a> {
        depth: f64,
        half_width: f64,
        grid: BenchmarkGrid,
        rows: &'a [crate::smatrix::BenchmarkRow],
    }
    w.json(
        "benchmark1d.json",
        &flags,
        Out {
            depth,
            half_width,
            grid,
            rows: &rows,
        },
    )?;
    Ok(flags)
}

#[derive(Serialize)]
struct CounterexampleEntry {
    lambda: f64,
    residual_mode_corrected: Vec<ResidualDecay>,
    residual_plain: Vec<ResidualDecay>,
    demos: Vec<FailureReport>,
    phase_csv: Vec<String>,
}

fn counterexample(w: &mut Writer, model: &ManifoldModel) -> Result<Vec<String>> {
    let cfg = w.cfg;
    let end = &model.ends[0];
    let h_r = match cfg.grid {
        Some(g) => (end.r_max - end.r0) / g.n as f64,
        None => DEFAULT_H_PARABOLIC,
    };
    let pm = ParabolicModel::from_manifold(model, h_r, DEFAULT_ANGULAR_NODES)?;
    let ks: Vec<usize> = (1..=cfg.modes.unwrap_or(2)).collect();
    let settings = DemoSettings::default();
    let mut flags = vec![];
    let mut entries = vec![];
    let constructs = pm.kappa <= 0.5 + 1e-12;
    let note = (!constructs).then(|| {
        format!(
            "kappa = {} > 1/2: no generalized eigenfunction is constructed; residual fits only",
            pm.kappa
        )
    });
    for (i, &lambda) in cfg.lambdas.iter().enumerate() {
        let mut corrected = vec![];
        let mut plain = vec![];
        for &k in &ks {
            let mut fit = |ansatz, into: &mut Vec<ResidualDecay>| -> Result<()> {
                match residual_decay(&pm, lambda, k, ansatz) {
                    Ok(r) => into.push(r),
                    Err(Error::Resolution(e)) => {
                        flags.push(format!("lambda = {lambda}, k = {k}: no residual fit ({e})"))
                    }
                    Err(e) => return Err(e),
                }
                Ok(())
            };
            if constructs {
                fit(Ansatz::ModeCorrected, &mut corrected)?;
            }
            fit(Ansatz::Plain, &mut plain)?;
        }
        let mut demos = vec![];
        let mut csvs = vec![];
        if constructs {
            demos = wkb_failure_demos(&pm, lambda, &ks, &settings)?;
            for d in &demos {
                let name = format!("phase_{i}_k{}.csv", d.k);
                d.write_phase_csv(w.csv(&name)?)?;
                csvs.push(name);
                if !d.ladder_converged {
                    flags.push(format!(
                        "lambda = {lambda}, k = {}: damping ladder spread {:.3e}",
                        d.k, d.ladder_spread
                    ));
                }
                if d.nonconvergence_lower_bound > cfg.tolerances.cauchy {
                    flags.push(format!(
                        "lambda = {lambda}, k = {}: plain transported trace does not converge (lower bound {:.3e})",
                        d.k, d.nonconvergence_lower_bound
                    ));
                }
            }
        }
        entries.push(CounterexampleEntry {
            lambda,
            residual_mode_corrected: corrected,
            residual_plain: plain,
            demos,
            phase_csv: csvs,
        });
    }
    #[derive(Serialize)]
    struct Out {
        kappa: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        h_r: f64,
        angular_nodes: usize,
        settings: DemoSettings,
        energies: Vec<CounterexampleEntry>,
    }
    w.json(
        "counterexample.json",
        &flags,
        Out {
            kappa: pm.kappa,
            note,
            h_r,
            angular_nodes: DEFAULT_ANGULAR_NODES,
            settings,
            energies: entries,
        },
    )?;
    Ok(flags)
}

/// Reads a configuration file and applies it with `out` taken from `dir`.
pub fn run_file(path: &Path, dir: &Path) -> Result<RunOutcome> {
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(path)?)?;
    cfg.out = dir.to_path_buf();
    run(&cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_model_shorthand;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("endscatter-exp-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn benchmark_writes_csv_and_reproducible_json() {
        let mut cfg = ExperimentConfig::new(Task::Benchmark1d, None, vec![0.5]);
        cfg.out = tmp("bench-a");
        let a = run(&cfg).unwrap();
        assert_eq!(a.exit_code, 0);
        let csv = fs::read_to_string(cfg.out.join("benchmark1d.csv")).unwrap();
        assert!(csv.lines().next().unwrap().contains("T2_analytic"));
        assert_eq!(csv.lines().count(), 2);
        let first = fs::read(cfg.out.join("benchmark1d.json")).unwrap();
        cfg.out = tmp("bench-b");
        run(&cfg).unwrap();
        assert_eq!(fs::read(cfg.out.join("benchmark1d.json")).unwrap(), first);
        let v: serde_json::Value = serde_json::from_slice(&first).unwrap();
        assert_eq!(v["config_hash"].as_str().unwrap(), cfg.hash());
        assert!(v["conventions"]["G"].is_string());
    }

    #[test]
    fn empty_energy_list_is_a_validation_failure() {
        let mut cfg = ExperimentConfig::new(Task::Benchmark1d, None, vec![]);
        cfg.out = tmp("empty");
        let e = run(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(!cfg.out.exists());
    }

    #[test]
    fn energies_below_threshold_are_refused() {
        let m = parse_model_shorthand("cylinder(1, 64)").unwrap();
        let mut cfg = ExperimentConfig::new(Task::Smatrix, Some(m), vec![1e-4]);
        cfg.out = tmp("below");
        let e = run(&cfg).unwrap_err();
        assert!(matches!(e, Error::Spectral(_)));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn resolve_and_dft_on_the_free_line() {
        let m = parse_model_shorthand("line(20)").unwrap();
        let mut cfg = ExperimentConfig::new(Task::Dft, Some(m), vec![1.0]);
        cfg.out = tmp("dft");
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, 0, "{:?}", out.flags);
        assert!(cfg.out.join("xi_0_plus.csv").exists());
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(cfg.out.join("dft.json")).unwrap()).unwrap();
        assert_eq!(v["result"]["transforms"].as_array().unwrap().len(), 2);
        cfg.task = Task::Resolve;
        let out = run(&cfg).unwrap();
        assert!(out.artifacts.iter().any(|p| p.ends_with("resolve_0.csv")));
    }

    #[test]
    fn strict_mode_turns_flags_into_exit_three() {
        let m = parse_model_shorthand("line(20)").unwrap();
        let mut cfg = ExperimentConfig::new(Task::Resolve, Some(m), vec![1.0]);
        cfg.tolerances.residual = 0.0;
        cfg.out = tmp("strict");
        assert_eq!(run(&cfg).unwrap().exit_code, 0);
        cfg.strict = true;
        let out = run(&cfg).unwrap();
        assert_eq!(out.exit_code, 3);
        assert!(!out.flags.is_empty());
    }
}
