//! Experiment configuration: tasks, grids, energy lists and model shorthands.

use crate::geometry::{AngularSpace, ManifoldModel, Potential};
use crate::solver::SourceSpec;
use crate::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Verify,
    Resolve,
    Dft,
    Smatrix,
    Benchmark1d,
    Counterexample,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Verify,
        Task::Resolve,
        Task::Dft,
        Task::Smatrix,
        Task::Benchmark1d,
        Task::Counterexample,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Verify => "verify",
            Task::Resolve => "resolve",
            Task::Dft => "dft",
            Task::Smatrix => "smatrix",
            Task::Benchmark1d => "benchmark1d",
            Task::Counterexample => "counterexample",
        }
    }

    /// Tasks that solve with radiation conditions at real energies.
    pub fn is_radiation(self) -> bool {
        matches!(self, Task::Resolve | Task::Dft | Task::Smatrix)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        Task::ALL
            .into_iter()
            .find(|k| k.name() == t)
            .ok_or_else(|| Error::Parse(format!("unknown task {s:?}")))
    }
}

/// `n=<int>,Rmax=<float>`. `n` counts line-grid nodes for the separable solver
/// and radial cells for the two-dimensional parabolic operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "Rmax")]
    pub r_max: f64,
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (mut n, mut r_max) = (None, None);
        for part in s.split(',') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("grid entry {part:?} is not key=value")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "n" => {
                    if n.is_some() {
                        return Err(Error::Parse("grid key n given twice".into()));
                    }
                    n = Some(
                        v.parse::<usize>()
                            .map_err(|e| Error::Parse(format!("grid n: {e}")))?,
                    );
                }
                "Rmax" | "rmax" | "R_max" => {
                    if r_max.is_some() {
                        return Err(Error::Parse("grid key Rmax given twice".into()));
                    }
                    r_max = Some(
                        v.parse::<f64>()
                            .map_err(|e| Error::Parse(format!("grid Rmax: {e}")))?,
                    );
                }
                _ => return Err(Error::Parse(format!("unknown grid key {k:?}"))),
            }
        }
        let g = GridSpec {
            n: n.ok_or_else(|| Error::Parse("grid needs n".into()))?,
            r_max: r_max.ok_or_else(|| Error::Parse("grid needs Rmax".into()))?,
        };
        g.validate()?;
        Ok(g)
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Config(format!("grid n = {} is below 8", self.n)));
        }
        if !(self.r_max.is_finite() && self.r_max > 1.0) {
            return Err(Error::Config(format!(
                "grid Rmax = {} must be finite and > 1",
                self.r_max
            )));
        }
        Ok(())
    }
}

/// Comma- or whitespace-separated energies; `a:b:n` expands to `n` evenly
/// spaced values from `a` to `b`. An empty string gives an empty list.
pub fn parse_lambda_list(s: &str) -> Result<Vec<f64>> {
    let mut out = vec![];
    for tok in s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
    {
        if tok.contains(':') {
            let parts: Vec<&str> = tok.split(':').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("range {tok:?} is not a:b:n")));
            }
            let a = parse_float(parts[0])?;
            let b = parse_float(parts[1])?;
            let n: usize = parts[2]
                .parse()
                .map_err(|e| Error::Parse(format!("range count {:?}: {e}", parts[2])))?;
            if n == 0 || n > 100_000 {
                return Err(Error::Parse(format!("range count {n} out of bounds")));
            }
            if n == 1 {
                out.push(a);
            } else {
                out.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64));
            }
        } else {
            out.push(parse_float(tok)?);
        }
    }
    Ok(out)
}

fn parse_float(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|e| Error::Parse(format!("{s:?}: {e}")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("{s:?} is not finite")));
    }
    Ok(v)
}

/// Named models, optionally with positional arguments:
///
/// | name | arguments (defaults) |
/// |---|---|
/// | `euclidean`, `cylinder` | `r0 = 1`, `Rmax = 256` |
/// | `hyperbolic` | `r0 = 1`, `Rmax = 32` |
/// | `line` | `Rmax = 40` |
/// | `square_well` | `depth = 1`, `half_width = 1`, `Rmax = 40` |
/// | `catenoid` | `Rmax = 256` |
/// | `strip` | `Rmax = 256` (two conic ends over an interval cross-section) |
/// | `asymmetric` | `amplitude = 0.5`, `center = 1.5`, `Rmax = 512` |
/// | `parabolic` | `kappa`, `r0 = 8`, `Rmax = 512` |
///
/// On the line models `Rmax` is the half-length of the line.
pub fn parse_model_shorthand(s: &str) -> Result<ManifoldModel> {
    let s = s.trim();
    let (name, args) = match s.find('(') {
        Some(i) => {
            let rest = s[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::Parse(format!("model {s:?}: missing ')'")))?;
            let args = if rest.trim().is_empty() {
                vec![]
            } else {
                rest.split(',')
                    .map(parse_float)
                    .collect::<Result<Vec<_>>>()?
            };
            (s[..i].trim(), args)
        }
        None => (s, vec![]),
    };
    let arity = |max: usize| -> Result<()> {
        if args.len() > max {
            Err(Error::Parse(format!(
                "model {name:?} takes at most {max} arguments"
            )))
        } else {
            Ok(())
        }
    };
    let arg = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    // line coordinate half-length X maps to the end radius sqrt(X^2 + w^2)
    let line_r = |x: f64| (x * x + 1.0).sqrt();
    let model = match name {
        "euclidean" => {
            arity(2)?;
            ManifoldModel::euclidean(arg(0, 1.0), arg(1, 256.0))
        }
        "cylinder" => {
            arity(2)?;
            ManifoldModel::cylinder(arg(0, 1.0), arg(1, 256.0))
        }
        "hyperbolic" => {
            arity(2)?;
            ManifoldModel::hyperbolic(arg(0, 1.0), arg(1, 32.0))
        }
        "line" => {
            arity(1)?;
            ManifoldModel::line(line_r(arg(0, 40.0)), Potential::Zero)
        }
        "square_well" => {
            arity(3)?;
            ManifoldModel::line(
                line_r(arg(2, 40.0)),
                Potential::SquareWell {
                    depth: arg(0, 1.0),
                    half_width: arg(1, 1.0),
                },
            )
        }
        "catenoid" => {
            arity(1)?;
            ManifoldModel::two_ended_surface(AngularSpace::Circle, arg(0, 256.0), Potential::Zero)
        }
        "strip" => {
            arity(1)?;
            ManifoldModel::two_ended_surface(AngularSpace::Interval, arg(0, 256.0), Potential::Zero)
        }
        "asymmetric" => {
            arity(3)?;
            ManifoldModel::two_ended_surface(
                AngularSpace::Circle,
                arg(2, 512.0),
                Potential::Bump {
                    amplitude: arg(0, 0.5),
                    center: arg(1, 1.5),
                    width: 1.0,
                },
            )
        }
        "parabolic" => {
            if args.is_empty() {
                return Err(Error::Parse("parabolic needs kappa".into()));
            }
            arity(3)?;
            ManifoldModel::parabolic(args[0], arg(1, 8.0), arg(2, 512.0))
        }
        _ => return Err(Error::Parse(format!("unknown model {name:?}"))),
    };
    model.validate()?;
    Ok(model)
}

/// A model given as JSON text or as a shorthand.
pub fn parse_model(text: &str) -> Result<ManifoldModel> {
    let t = text.trim();
    if t.starts_with('{') {
        let m: ManifoldModel = serde_json::from_str(t)?;
        m.validate()?;
        Ok(m)
    } else {
        parse_model_shorthand(t)
    }
}

/// `--model` argument: an existing file holding JSON (or a shorthand), else a
/// shorthand.
pub fn load_model(arg: &str) -> Result<ManifoldModel> {
    let path = std::path::Path::new(arg);
    if path.is_file() {
        parse_model(&std::fs::read_to_string(path)?)
    } else {
        parse_model_shorthand(arg)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ModelField {
    Shorthand(String),
    Inline(ManifoldModel),
}

fn model_field<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<ManifoldModel>, D::Error> {
    use serde::de::Error as _;
    match Option::<ModelField>::deserialize(d)? {
        None => Ok(None),
        Some(ModelField::Shorthand(s)) => parse_model_shorthand(&s)
            .map(Some)
            .map_err(D::Error::custom),
        Some(ModelField::Inline(m)) => Ok(Some(m)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Radiation tasks need `lambda > lambda0 + lambda_margin`.
    pub lambda_margin: f64,
    /// Relative residual of a line solve.
    pub residual: f64,
    /// `|S* S - I|_F`.
    pub unitarity: f64,
    /// Relative window-to-window change of a transported trace.
    pub cauchy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            lambda_margin: 1e-3,
            residual: 1e-8,
            unitarity: 1e-2,
            cauchy: 5e-2,
        }
    }
}

/// Default spacing of line grids and of the radial grid of the parabolic
/// operator.
pub const DEFAULT_H: f64 = 0.1;
pub const DEFAULT_H_PARABOLIC: f64 = 0.2;
pub const DEFAULT_ANGULAR_NODES: usize = 31;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, deserialize_with = "model_field")]
    pub model: Option<ManifoldModel>,
    pub task: Task,
    #[serde(rename = "lambda")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    /// Basis truncation; for the counterexample, the number of angular states.
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub source: Option<SourceSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Weight exponent of the radiation residual reported by `resolve`.
    #[serde(default = "default_beta")]
    pub radiation_beta: f64,
    #[serde(default)]
    pub strict: bool,
    /// Not part of the hash: the same experiment written elsewhere is the
    /// same experiment.
    #[serde(default = "default_out", skip_serializing)]
    pub out: PathBuf,
}

fn default_beta() -> f64 {
    0.4
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(task: Task, model: Option<ManifoldModel>, lambdas: Vec<f64>) -> Self {
        ExperimentConfig {
            model,
            task,
            lambdas,
            grid: None,
            modes: None,
            source: None,
            tolerances: Tolerances::default(),
            radiation_beta: default_beta(),
            strict: false,
            out: default_out(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_str(text)?;
        Ok(c)
    }

    /// Hex SHA-256 of the canonical JSON of the configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("configuration serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The model with the grid's `Rmax` applied to every end.
    pub fn effective_model(&self) -> Option<ManifoldModel> {
        let mut m = self.model.clone()?;
        if let Some(g) = self.grid {
            for e in &mut m.ends {
                e.r_max = g.r_max;
            }
        }
        Some(m)
    }

    /// Schema-level checks that need no numerics beyond the critical energy.
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() {
            return Err(Error::Config("the energy list is empty".into()));
        }
        if let Some(l) = self.lambdas.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::Config(format!(
                "energy {l} must be finite and positive"
            )));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if !(self.radiation_beta.is_finite() && self.radiation_beta >= 0.0) {
            return Err(Error::Config(
                "radiation_beta must be finite and non-negative".into(),
            ));
        }
        if self.modes == Some(0) {
            return Err(Error::Config("modes must be at least 1".into()));
        }
        let t = &self.tolerances;
        if ![t.lambda_margin, t.residual, t.unitarity, t.cauchy]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
        {
            return Err(Error::Config(
                "tolerances must be finite and non-negative".into(),
            ));
        }
        let model = self.effective_model();
        if let Some(m) = &model {
            m.validate()?;
        }
        match self.task {
            Task::Benchmark1d => {
                if let Some(m) = &model {
                    benchmark_well(m)?;
                }
                if self.source.is_some() {
                    return Err(Error::Config("benchmark1d takes no source".into()));
                }
            }
            Task::Counterexample => {
                let m = model.as_ref().ok_or_else(|| {
                    Error::Config("counterexample needs a parabolic model".into())
                })?;
                if m.parabolic_kappa().is_none() {
                    return Err(Error::Config(
                        "counterexample needs a parabolic model".into(),
                    ));
                }
            }
            task => {
                let m = model
                    .as_ref()
                    .ok_or_else(|| Error::Config(format!("task {task} needs a model")))?;
                if task != Task::Verify && m.is_parabolic() {
                    return Err(Error::Config(format!(
                        "task {task} runs on warped models; use counterexample for parabolic ends"
                    )));
                }
            }
        }
        if self.source.is_some() && !matches!(self.task, Task::Resolve | Task::Dft) {
            return Err(Error::Config(format!("task {} takes no source", self.task)));
        }
        Ok(())
    }
}

/// Depth and half-width of a square-well line model.
pub fn benchmark_well(m: &ManifoldModel) -> Result<(f64, f64)> {
    let is_line = m.ends.len() == 2 && m.ends.iter().all(|e| e.dimension() == 1);
    match m.potential {
        Potential::SquareWell { depth, half_width } if is_line => Ok((depth, half_width)),
        Potential::Zero if is_line => Ok((0.0, 1.0)),
        _ => Err(Error::Config(
            "benchmark1d needs a one-dimensional line model with a square well".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_spec_parses_in_any_order() {
        let g: GridSpec = "n=2001,Rmax=128.5".parse().unwrap();
        assert_eq!(
            g,
            GridSpec {
                n: 2001,
                r_max: 128.5
            }
        );
        let h: GridSpec = " Rmax = 64 , n = 100 ".parse().unwrap();
        assert_eq!(
            h,
            GridSpec {
                n: 100,
                r_max: 64.0
            }
        );
    }

    #[test]
    fn grid_spec_rejects_junk() {
        for s in [
            "",
            "n=10",
            "Rmax=5",
            "n=10,n=11,Rmax=4",
            "n=x,Rmax=4",
            "n=100,Rmax=inf",
            "n=4,Rmax=10",
            "q=1",
        ] {
            assert!(s.parse::<GridSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn lambda_lists() {
        assert_eq!(parse_lambda_list("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert_eq!(parse_lambda_list("1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(parse_lambda_list("").unwrap().is_empty());
        assert!(parse_lambda_list("1,nan").is_err());
        assert!(parse_lambda_list("1:2").is_err());
        assert!(parse_lambda_list("abc").is_err());
    }

    #[test]
    fn shorthands_build_valid_models() {
        for s in [
            "euclidean",
            "euclidean(2, 64)",
            "cylinder",
            "hyperbolic(1,16)",
            "line",
            "square_well(2,0.5)",
            "catenoid(64)",
            "strip(32)",
            "asymmetric",
            "parabolic(0.5)",
            "parabolic(0.3, 8, 128)",
        ] {
            parse_model_shorthand(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        }
        assert_eq!(
            parse_model_shorthand("parabolic(0.5)")
                .unwrap()
                .parabolic_kappa(),
            Some(0.5)
        );
        for s in [
            "parabolic",
            "nope",
            "line(1,2)",
            "euclidean(1",
            "euclidean(0.5, 10)",
        ] {
            assert!(parse_model_shorthand(s).is_err(), "{s}");
        }
    }

    #[test]
    fn model_json_and_shorthand_agree() {
        let m = parse_model_shorthand("euclidean(1, 64)").unwrap();
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    #[test]
    fn config_json_accepts_shorthand_models() {
        let c = ExperimentConfig::from_json(
            r#"{"model":"parabolic(0.5)","task":"verify","lambda":[1.0],"grid":{"n":100,"Rmax":64}}"#,
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.effective_model().unwrap().ends[0].r_max, 64.0);
        assert!(
            ExperimentConfig::from_json(r#"{"task":"verify","lambda":[1],"bogus":1}"#).is_err()
        );
    }

    #[test]
    fn validation_failures() {
        let empty = ExperimentConfig::new(Task::Benchmark1d, None, vec![]);
        assert!(matches!(empty.validate(), Err(Error::Config(_))));
        let no_model = ExperimentConfig::new(Task::Smatrix, None, vec![1.0]);
        assert!(no_model.validate().is_err());
        let parab = parse_model_shorthand("parabolic(0.5)").unwrap();
        assert!(
            ExperimentConfig::new(Task::Resolve, Some(parab.clone()), vec![1.0])
                .validate()
                .is_err()
        );
        assert!(
            ExperimentConfig::new(Task::Counterexample, Some(parab), vec![1.0])
                .validate()
                .is_ok()
        );
        let eu = parse_model_shorthand("euclidean").unwrap();
        assert!(
            ExperimentConfig::new(Task::Counterexample, Some(eu.clone()), vec![1.0])
                .validate()
                .is_err()
        );
        assert!(
            ExperimentConfig::new(Task::Benchmark1d, Some(eu), vec![1.0])
                .validate()
                .is_err()
        );
        assert!(ExperimentConfig::new(Task::Benchmark1d, None, vec![-1.0])
            .validate()
            .is_err());
    }

    #[test]
    fn hash_ignores_output_directory() {
        let mut a = ExperimentConfig::new(Task::Benchmark1d, None, vec![0.5]);
        let h = a.hash();
        a.out = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), h);
        a.lambdas.push(1.0);
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
            assert_eq!(
                serde_json::to_string(&t).unwrap(),
                format!("\"{}\"", t.name())
            );
        }
        assert!("bogus".parse::<Task>().is_err());
    }

    proptest! {
        #[test]
        fn grid_spec_round_trips(n in 8usize..1_000_000, r in 1.5f64..1e6) {
            let g: GridSpec = format!("n={n},Rmax={r}").parse().unwrap();
            prop_assert_eq!(g, GridSpec { n, r_max: r });
        }

        #[test]
        fn lambda_list_round_trips(v in proptest::collection::vec(-1e6f64..1e6, 0..20)) {
            let s = v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            prop_assert_eq!(parse_lambda_list(&s).unwrap(), v);
        }

        #[test]
        fn parsers_never_panic(s in "\\PC{0,40}") {
            let _ = s.parse::<GridSpec>();
            let _ = parse_lambda_list(&s);
            let _ = parse_model_shorthand(&s);
            let _ = ExperimentConfig::from_json(&s);
        }
    }
}
