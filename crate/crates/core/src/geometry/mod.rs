//! Manifold models with ends and everything geometric about them.
//!
//! Two kinds of end chart are supported. Warped ends carry the metric
//! `dr^2 + f(r)^2 dtheta^2` (or just `dr^2` in dimension one). Parabolic ends
//! are the region `y > 0` of the plane in the coordinates
//! `r^2 = kappa x^2 + y^2`, `theta = x y^{-kappa}`.
//!
//! Warped models are evaluated through [`LineGeometry`]: a single line
//! coordinate `x` runs along the ends (`x = r` for a single end with a wall at
//! `r0`; `x` in `[-X, X]` with `r = sqrt(x^2 + w^2)` for two glued ends).

mod conditions;
mod flow;
mod line;
mod metric;
mod parabolic;
mod phase;
mod potential;
mod profile;

pub use conditions::{verify_conditions, ConditionDiagnostic, ConditionReport, EXPONENT_CAP};
pub use flow::{integrate_flow, pushforward_bound_check, FlowOrbit, PushforwardReport};
pub use line::{LineGeometry, RDerivs};
pub use metric::{
    effective_potential, eval_metric, liouville_identity_defect, sample_geometry,
    EffectivePotential, GeometricSamples, MetricData,
};
pub use parabolic::{ParabolicChart, ParabolicPoint};
pub use phase::{
    critical_energy, phase_a, phase_b, r_lambda, riccati_residual, CriticalEnergy, PhaseTable, Sign,
};
pub use potential::Potential;
pub use profile::{WarpDerivs, WarpProfile, WarpProfileSpec};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngularSpace {
    /// Circle of circumference `2 pi`.
    #[default]
    Circle,
    /// Interval `(-1, 1)` with Dirichlet ends.
    Interval,
}

/// Where the curvature part of the effective potential is housed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSplit {
    Q1,
    Q2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChartKind {
    Warped {
        d: u32,
        f: WarpProfile,
        #[serde(default)]
        angular: AngularSpace,
    },
    Parabolic {
        kappa: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndChart {
    #[serde(flatten)]
    pub kind: ChartKind,
    pub r0: f64,
    #[serde(rename = "Rmax")]
    pub r_max: f64,
    /// Defaults to `q1` on warped ends and `q2` on parabolic ends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_in: Option<CurvatureSplit>,
}

impl EndChart {
    pub fn warped(d: u32, f: WarpProfile, angular: AngularSpace, r0: f64, r_max: f64) -> Self {
        EndChart {
            kind: ChartKind::Warped { d, f, angular },
            r0,
            r_max,
            curvature_in: None,
        }
    }

    pub fn parabolic(kappa: f64, r0: f64, r_max: f64) -> Self {
        EndChart {
            kind: ChartKind::Parabolic { kappa },
            r0,
            r_max,
            curvature_in: None,
        }
    }

    pub fn split(&self) -> CurvatureSplit {
        self.curvature_in.unwrap_or(match self.kind {
            ChartKind::Warped { .. } => CurvatureSplit::Q1,
            ChartKind::Parabolic { .. } => CurvatureSplit::Q2,
        })
    }

    pub fn dimension(&self) -> u32 {
        match self.kind {
            ChartKind::Warped { d, .. } => d,
            ChartKind::Parabolic { .. } => 2,
        }
    }

    pub fn angular(&self) -> Option<AngularSpace> {
        match self.kind {
            ChartKind::Warped { d: 2, angular, .. } => Some(angular),
            ChartKind::Warped { .. } => None,
            ChartKind::Parabolic { .. } => Some(AngularSpace::Interval),
        }
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self.kind, ChartKind::Parabolic { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    SingleEndDirichlet,
    TwoEndLine,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldModel {
    pub ends: Vec<EndChart>,
    pub coupling: Coupling,
    #[serde(default)]
    pub potential: Potential,
    /// Width `w` in `r = sqrt(x^2 + w^2)` for glued ends.
    #[serde(default = "one")]
    pub smoothing_width: f64,
}

impl ManifoldModel {
    pub fn single(end: EndChart, potential: Potential) -> Self {
        ManifoldModel {
            ends: vec![end],
            coupling: Coupling::SingleEndDirichlet,
            potential,
            smoothing_width: 1.0,
        }
    }

    pub fn glued(left: EndChart, right: EndChart, potential: Potential) -> Self {
        ManifoldModel {
            ends: vec![left, right],
            coupling: Coupling::TwoEndLine,
            potential,
            smoothing_width: 1.0,
        }
    }

    /// Plane-like end `f = r` with a Dirichlet wall at `r0`.
    pub fn euclidean(r0: f64, r_max: f64) -> Self {
        Self::single(
            EndChart::warped(2, WarpProfile::linear(1.0), AngularSpace::Circle, r0, r_max),
            Potential::Zero,
        )
    }

    /// Hyperbolic-cusp-free funnel end `f = e^r`.
    pub fn hyperbolic(r0: f64, r_max: f64) -> Self {
        Self::single(
            EndChart::warped(
                2,
                WarpProfile::exponential(),
                AngularSpace::Circle,
                r0,
                r_max,
            ),
            Potential::Zero,
        )
    }

    /// Product cylinder `f = 1`.
    pub fn cylinder(r0: f64, r_max: f64) -> Self {
        Self::single(
            EndChart::warped(
                2,
                WarpProfile::constant(1.0),
                AngularSpace::Circle,
                r0,
                r_max,
            ),
            Potential::Zero,
        )
    }

    /// The real line as two one-dimensional ends.
    pub fn line(r_max: f64, potential: Potential) -> Self {
        let end = EndChart::warped(
            1,
            WarpProfile::linear(1.0),
            AngularSpace::Circle,
            4.0,
            r_max,
        );
        Self::glued(end.clone(), end, potential)
    }

    /// Two conic ends `f = r` glued through a neck of radius `w = 1`, so that
    /// the warp along the line is `sqrt(1 + x^2)`.
    pub fn two_ended_surface(angular: AngularSpace, r_max: f64, potential: Potential) -> Self {
        let end = EndChart::warped(2, WarpProfile::linear(1.0), angular, 4.0, r_max);
        Self::glued(end.clone(), end, potential)
    }

    pub fn parabolic(kappa: f64, r0: f64, r_max: f64) -> Self {
        Self::single(EndChart::parabolic(kappa, r0, r_max), Potential::Zero)
    }

    pub fn is_parabolic(&self) -> bool {
        self.ends.iter().any(|e| e.is_parabolic())
    }

    pub fn parabolic_kappa(&self) -> Option<f64> {
        self.ends.iter().find_map(|e| match e.kind {
            ChartKind::Parabolic { kappa } => Some(kappa),
            _ => None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.ends.is_empty() {
            return Err(Error::Model("a model needs at least one end".into()));
        }
        for (i, e) in self.ends.iter().enumerate() {
            if !(e.r0 >= 1.0) || !e.r0.is_finite() {
                return Err(Error::Model(format!("end {i}: r0 must be >= 1")));
            }
            if !(e.r_max > e.r0) || !e.r_max.is_finite() {
                return Err(Error::Model(format!("end {i}: Rmax must exceed r0")));
            }
            match &e.kind {
                ChartKind::Warped { d, f, .. } => {
                    if *d != 1 && *d != 2 {
                        return Err(Error::Model(format!(
                            "end {i}: dimension {d} unsupported (1 or 2)"
                        )));
                    }
                    let lo = match self.coupling {
                        Coupling::SingleEndDirichlet => e.r0,
                        Coupling::TwoEndLine => self.smoothing_width,
                    };
                    let (a, b) = f.domain();
                    if *d == 2 && (lo < a || e.r_max > b) {
                        return Err(Error::Model(format!(
                            "end {i}: warp table covers [{a}, {b}], needs [{lo}, {}]",
                            e.r_max
                        )));
                    }
                    if *d == 2 {
                        let n = 64;
                        let samples: Vec<f64> = (0..=n)
                            .map(|k| lo * (e.r_max / lo).powf(k as f64 / n as f64))
                            .map(|r| r.clamp(lo * (1.0 + 1e-4) + 1e-4, e.r_max * (1.0 - 1e-4)))
                            .collect();
                        if samples.iter().any(|r| !f.derivs(*r).ln_f.is_finite()) {
                            return Err(Error::Model(format!("end {i}: f must be positive")));
                        }
                        let err = f.derivative_consistency(&samples);
                        if err > 1e-6 {
                            return Err(Error::Model(format!(
                                "end {i}: warp derivatives inconsistent (relative error {err:.2e})"
                            )));
                        }
                    }
                }
                ChartKind::Parabolic { kappa } => {
                    if !(*kappa > 0.0 && *kappa < 1.0) {
                        return Err(Error::Model(format!("end {i}: kappa must lie in (0, 1)")));
                    }
                    if self.coupling != Coupling::SingleEndDirichlet || self.ends.len() != 1 {
                        return Err(Error::Model(
                            "parabolic ends are supported as single-end models only".into(),
                        ));
                    }
                    if !self.potential.is_zero() {
                        return Err(Error::Model(
                            "parabolic ends support the zero potential only".into(),
                        ));
                    }
                }
            }
        }
        match self.coupling {
            Coupling::SingleEndDirichlet => {
                if self.ends.len() != 1 {
                    return Err(Error::Model(
                        "single_end_dirichlet needs exactly one end".into(),
                    ));
                }
            }
            Coupling::TwoEndLine => {
                if self.ends.len() != 2 {
                    return Err(Error::Model("two_end_line needs exactly two ends".into()));
                }
                let (a, b) = (&self.ends[0], &self.ends[1]);
                if a.is_parabolic() || b.is_parabolic() {
                    return Err(Error::Model("two_end_line needs warped ends".into()));
                }
                if a.dimension() != b.dimension() || a.angular() != b.angular() {
                    return Err(Error::Model(
                        "two_end_line ends need matching dimension and angular space".into(),
                    ));
                }
                let w = self.smoothing_width;
                if !(w > 0.0) || !w.is_finite() {
                    return Err(Error::Model("smoothing_width must be positive".into()));
                }
                for (i, e) in self.ends.iter().enumerate() {
                    if e.r0 <= 2.0 * w * 1.05 {
                        return Err(Error::Model(format!(
                            "end {i}: r0 must exceed 2.1 x smoothing_width so |dr| stays bounded below on r > r0/2"
                        )));
                    }
                }
                if a.dimension() == 2 {
                    let fa = warp_of(a).derivs(w).ln_f;
                    let fb = warp_of(b).derivs(w).ln_f;
                    if (fa - fb).abs() > 1e-8 {
                        return Err(Error::Model(
                            "glued ends need equal warp f at the neck radius".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn warp_of(e: &EndChart) -> &WarpProfile {
    match &e.kind {
        ChartKind::Warped { f, .. } => f,
        ChartKind::Parabolic { .. } => panic!("parabolic end has no warp profile"),
    }
}
