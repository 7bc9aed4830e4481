//! Named source profiles for resolvent solves.

use super::LineGrid;
use crate::geometry::LineGeometry;
use crate::modes::{Gauge, ModeFunction};
use crate::numerics::chi;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// A source confined to one mode, given in half-density gauge along the line
/// coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum SourceSpec {
    /// `exp(-(x - center)^2 / (2 width^2))`.
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default)]
        mode: i64,
    },
    /// Smooth plateau equal to one on `r in [r_lo, r_hi]` of one end, with
    /// unit-width shoulders.
    ShellBump {
        r_lo: f64,
        r_hi: f64,
        #[serde(default)]
        end: usize,
        #[serde(default)]
        mode: i64,
    },
    /// Unit mass at `center` smeared over a Gaussian of width `eps`.
    PointMassRegularized {
        center: f64,
        eps: f64,
        #[serde(default)]
        mode: i64,
    },
}

impl SourceSpec {
    pub fn mode(&self) -> i64 {
        match *self {
            SourceSpec::Gaussian { mode, .. }
            | SourceSpec::ShellBump { mode, .. }
            | SourceSpec::PointMassRegularized { mode, .. } => mode,
        }
    }

    fn value(&self, geom: &LineGeometry, x: f64) -> f64 {
        match *self {
            SourceSpec::Gaussian { center, width, .. } => {
                (-(x - center).powi(2) / (2.0 * width * width)).exp()
            }
            SourceSpec::ShellBump {
                r_lo, r_hi, end, ..
            } => {
                if geom.end_of(x) != end {
                    return 0.0;
                }
                let r = geom.r(x).r;
                chi(1.0 + (r_lo - r).max(0.0)) * chi(1.0 + (r - r_hi).max(0.0))
            }
            SourceSpec::PointMassRegularized { center, eps, .. } => {
                (-(x - center).powi(2) / (2.0 * eps * eps)).exp()
                    / (eps * (std::f64::consts::TAU).sqrt())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SourceSpec::Gaussian { center, width, .. } => {
                center.is_finite() && width > 0.0 && width.is_finite()
            }
            SourceSpec::ShellBump { r_lo, r_hi, .. } => {
                r_lo.is_finite() && r_hi.is_finite() && r_hi >= r_lo
            }
            SourceSpec::PointMassRegularized { center, eps, .. } => {
                center.is_finite() && eps > 0.0 && eps.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid source parameters: {self:?}"
            )))
        }
    }

    /// Samples the source on the grid nodes.
    pub fn build(
        &self,
        geom: &LineGeometry,
        grid: &LineGrid,
        labels: &[i64],
    ) -> Result<ModeFunction> {
        self.validate()?;
        let k = labels
            .iter()
            .position(|l| *l == self.mode())
            .ok_or_else(|| {
                Error::Config(format!("source mode {} is not in the basis", self.mode()))
            })?;
        if let SourceSpec::ShellBump { end, .. } = *self {
            if end >= geom.n_ends() {
                return Err(Error::Config(format!("source end {end} out of range")));
            }
        }
        let x = grid.nodes();
        let mut f = ModeFunction::zeros(geom, &x, labels, Gauge::HalfDensity);
        for (i, xi) in x.iter().enumerate() {
            if i == 0 && grid.dirichlet_lo {
                continue;
            }
            f.u[k][i] = C64::new(self.value(geom, *xi), 0.0);
        }
        if f.u[k].iter().all(|v| v.norm() == 0.0) {
            return Err(Error::Config("source vanishes on the grid".into()));
        }
        Ok(f)
    }
}
