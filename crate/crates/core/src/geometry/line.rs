//! Evaluation of warped models along the line coordinate.

use super::{warp_of, ChartKind, Coupling, CurvatureSplit, ManifoldModel, WarpDerivs};
use crate::numerics::chi;
use crate::{Error, Result};

/// `r` and its first three derivatives with respect to the line coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RDerivs {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

/// Warped model seen along the line coordinate `x`.
#[derive(Clone, Debug)]
pub struct LineGeometry {
    pub model: ManifoldModel,
    /// Line dimension of the angular factor plus one.
    pub d: u32,
    /// Half-lengths of the line on each end (for one end: `[r0, Rmax]`).
    x_lo: f64,
    x_hi: f64,
    /// Position of the reference sphere `r = r0` on each end.
    x_ref: Vec<f64>,
}

impl LineGeometry {
    pub fn new(model: &ManifoldModel) -> Result<Self> {
        model.validate()?;
        if model.is_parabolic() {
            return Err(Error::NonSeparable(
                "parabolic ends have no line representation".into(),
            ));
        }
        let d = model.ends[0].dimension();
        let w = model.smoothing_width;
        let (x_lo, x_hi, x_ref) = match model.coupling {
            Coupling::SingleEndDirichlet => {
                let e = &model.ends[0];
                (e.r0, e.r_max, vec![e.r0])
            }
            Coupling::TwoEndLine => {
                let a = &model.ends[0];
                let b = &model.ends[1];
                (
                    -(a.r_max * a.r_max - w * w).sqrt(),
                    (b.r_max * b.r_max - w * w).sqrt(),
                    vec![-(a.r0 * a.r0 - w * w).sqrt(), (b.r0 * b.r0 - w * w).sqrt()],
                )
            }
        };
        Ok(LineGeometry {
            model: model.clone(),
            d,
            x_lo,
            x_hi,
            x_ref,
        })
    }

    pub fn n_ends(&self) -> usize {
        self.model.ends.len()
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x_lo, self.x_hi)
    }

    /// Line coordinate of the reference sphere of an end.
    pub fn x_ref(&self, end: usize) -> f64 {
        self.x_ref[end]
    }

    /// +1 if `r` grows with `x` on this end, -1 otherwise.
    pub fn outward(&self, end: usize) -> f64 {
        match self.model.coupling {
            Coupling::TwoEndLine if end == 0 => -1.0,
            _ => 1.0,
        }
    }

    pub fn end_of(&self, x: f64) -> usize {
        match self.model.coupling {
            Coupling::SingleEndDirichlet => 0,
            Coupling::TwoEndLine => usize::from(x >= 0.0),
        }
    }

    pub fn r0(&self, end: usize) -> f64 {
        self.model.ends[end].r0
    }

    pub fn r_max(&self, end: usize) -> f64 {
        self.model.ends[end].r_max
    }

    pub fn r(&self, x: f64) -> RDerivs {
        match self.model.coupling {
            Coupling::SingleEndDirichlet => RDerivs {
                r: x,
                r1: 1.0,
                r2: 0.0,
                r3: 0.0,
            },
            Coupling::TwoEndLine => {
                let w2 = self.model.smoothing_width.powi(2);
                let r = (x * x + w2).sqrt();
                RDerivs {
                    r,
                    r1: x / r,
                    r2: w2 / (r * r * r),
                    r3: -3.0 * w2 * x / r.powi(5),
                }
            }
        }
    }

    /// Line coordinate of radius `r` on an end.
    pub fn x_of_r(&self, end: usize, r: f64) -> f64 {
        match self.model.coupling {
            Coupling::SingleEndDirichlet => r,
            Coupling::TwoEndLine => {
                let w = self.model.smoothing_width;
                self.outward(end) * (r * r - w * w).max(0.0).sqrt()
            }
        }
    }

    /// Logarithmic derivatives of the warp `F(x) = f(r(x))` in `x`.
    pub fn warp(&self, x: f64) -> WarpDerivs {
        let end = self.end_of(x);
        let rd = self.r(x);
        let f = warp_of(&self.model.ends[end]).derivs(rd.r);
        WarpDerivs {
            ln_f: f.ln_f,
            d1: f.d1 * rd.r1,
            d2: f.d2 * rd.r1 * rd.r1 + f.d1 * rd.r2,
            d3: f.d3 * rd.r1.powi(3) + 3.0 * f.d2 * rd.r1 * rd.r2 + f.d1 * rd.r3,
        }
    }

    /// `Delta r` and `d/dx Delta r`.
    pub fn laplacian_r(&self, x: f64) -> (f64, f64) {
        let rd = self.r(x);
        let k = (self.d - 1) as f64;
        if k == 0.0 {
            return (rd.r2, rd.r3);
        }
        let w = self.warp(x);
        let lap = rd.r2 + k * w.d1 * rd.r1;
        let dlap = rd.r3 + k * ((w.d2 - w.d1 * w.d1) * rd.r1 + w.d1 * rd.r2);
        (lap, dlap)
    }

    /// Cutoff `eta = 1 - chi(2 r / r0)`.
    pub fn eta(&self, x: f64) -> f64 {
        let end = self.end_of(x);
        1.0 - chi(2.0 * self.r(x).r / self.r0(end))
    }

    /// Curvature part `(1/8) eta~ [(Delta r)^2 + 2 grad^r Delta r]` of `q`.
    pub fn curvature_potential(&self, x: f64) -> f64 {
        let eta = self.eta(x);
        if eta == 0.0 {
            return 0.0;
        }
        let rd = self.r(x);
        let (lap, dlap) = self.laplacian_r(x);
        let eta_t = eta / (rd.r1 * rd.r1);
        0.125 * eta_t * (lap * lap + 2.0 * rd.r1 * dlap)
    }

    /// Liouville potential `(F^{1/2})'' / (2 F^{1/2})` of the half-density
    /// transform (zero in dimension one).
    pub fn liouville_potential(&self, x: f64) -> f64 {
        if self.d == 1 {
            return 0.0;
        }
        let w = self.warp(x);
        0.25 * w.d2 - 0.125 * w.d1 * w.d1
    }

    pub fn potential(&self, x: f64) -> f64 {
        self.model.potential.radial_value(x, self.r(x).r)
    }

    /// Effective potential `q = V + curvature`.
    pub fn q(&self, x: f64) -> f64 {
        self.potential(x) + self.curvature_potential(x)
    }

    /// Long-range part `q1` of the splitting.
    pub fn q1(&self, x: f64) -> f64 {
        let end = self.end_of(x);
        let r = self.r(x).r;
        let lr = self.model.potential.long_range(r);
        match self.model.ends[end].split() {
            CurvatureSplit::Q1 => lr + self.curvature_potential(x),
            CurvatureSplit::Q2 => lr,
        }
    }

    pub fn q2(&self, x: f64) -> f64 {
        self.q(x) - self.q1(x)
    }

    /// `d q1 / dx` and `d^2 q1 / dx^2` by scale-aware differences.
    pub fn q1_derivs(&self, x: f64) -> (f64, f64) {
        let h = 1e-3 * self.r(x).r.max(1.0);
        let f = |t: f64| self.q1(t);
        (crate::numerics::d1(f, x, h), crate::numerics::d2(f, x, h))
    }

    /// Potential of the per-mode radial operator in half-density gauge.
    pub fn mode_potential(&self, x: f64, nu: f64) -> f64 {
        let v = self.potential(x);
        if self.d == 1 {
            return v;
        }
        let w = self.warp(x);
        let ang = if nu == 0.0 {
            0.0
        } else {
            0.5 * nu * (-2.0 * w.ln_f).exp()
        };
        ang + self.liouville_potential(x) + v
    }

    /// `F(x)` scale factor between `dtheta` and the induced sphere measure
    /// `dA_r` over `|dr|` at the reference sphere of an end.
    pub fn reference_measure(&self, end: usize) -> f64 {
        let x = self.x_ref(end);
        let r1 = self.r(x).r1.abs();
        if self.d == 1 {
            1.0 / r1
        } else {
            self.warp(x).f() / r1
        }
    }

    pub fn chart_kind(&self, end: usize) -> &ChartKind {
        &self.model.ends[end].kind
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngularSpace, EndChart, Potential, WarpProfile};

    #[test]
    fn warped_curvature_equals_liouville_term() {
        for f in [
            WarpProfile::linear(1.0),
            WarpProfile::exponential(),
            WarpProfile::constant(2.0),
        ] {
            let m = ManifoldModel::single(
                EndChart::warped(2, f, AngularSpace::Circle, 1.0, 64.0),
                Potential::Zero,
            );
            let g = LineGeometry::new(&m).unwrap();
            for x in [1.0, 2.0, 7.5, 40.0] {
                assert!((g.curvature_potential(x) - g.liouville_potential(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn glued_line_matches_catenoid_warp() {
        let m = ManifoldModel::two_ended_surface(AngularSpace::Circle, 64.0, Potential::Zero);
        let g = LineGeometry::new(&m).unwrap();
        for x in [-3.0, -0.2, 0.0, 0.7, 5.0] {
            let w = g.warp(x);
            let big_f = (1.0 + x * x).sqrt();
            assert!((w.f() - big_f).abs() < 1e-12);
            assert!((w.d1 - x / (1.0 + x * x)).abs() < 1e-12);
            assert!((w.d2 - 1.0 / (1.0 + x * x).powi(2)).abs() < 1e-12);
        }
        let (lo, hi) = g.x_range();
        assert!((hi - (64.0f64 * 64.0 - 1.0).sqrt()).abs() < 1e-12);
        assert_eq!(lo, -hi);
        assert_eq!(g.end_of(-0.5), 0);
        assert!((g.x_of_r(0, 4.0) + 15f64.sqrt()).abs() < 1e-12);
    }
}
