//! Warp profiles `f(r)` of warped-product ends.
//!
//! Everything downstream only needs logarithmic derivatives, which stay finite
//! for exponential profiles long after `f` itself overflows.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Serialized form of a warp profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum WarpProfileSpec {
    /// `f = scale * r`.
    R {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `f = e^r`.
    ExpR,
    /// `f = value`.
    Const {
        #[serde(default = "one")]
        value: f64,
    },
    /// Tabulated `f`, interpolated by a natural cubic spline of `ln f`.
    CustomTable { r: Vec<f64>, f: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

/// `ln f` and the ratios `f'/f`, `f''/f`, `f'''/f`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WarpDerivs {
    pub ln_f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl WarpDerivs {
    pub fn f(&self) -> f64 {
        self.ln_f.exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct LogSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl LogSpline {
    fn new(x: Vec<f64>, f: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 4 || f.len() != n {
            return Err(Error::Model(
                "custom_table needs at least 4 matching (r, f) samples".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Model("custom_table radii must increase".into()));
        }
        if f.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Model("custom_table values must be positive".into()));
        }
        let y: Vec<f64> = f.iter().map(|v| v.ln()).collect();
        // natural spline second derivatives by the Thomas algorithm
        let mut a = vec![0.0; n];
        let mut b = vec![1.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            a[i] = h0 / 6.0;
            b[i] = (h0 + h1) / 3.0;
            c[i] = h1 / 6.0;
            d[i] = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        }
        for i in 1..n {
            let w = a[i] / b[i - 1];
            b[i] -= w * c[i - 1];
            d[i] -= w * d[i - 1];
        }
        let mut m = vec![0.0; n];
        m[n - 1] = d[n - 1] / b[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (d[i] - c[i] * m[i + 1]) / b[i];
        }
        Ok(LogSpline { x, y, m })
    }

    fn eval(&self, t: f64) -> [f64; 4] {
        let n = self.x.len();
        let i = match self.x.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        };
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let y = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let y1 = (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0
            + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let y2 = a * m0 + b * m1;
        let y3 = (m1 - m0) / h;
        [y, y1, y2, y3]
    }
}

/// Runtime warp profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WarpProfileSpec", into = "WarpProfileSpec")]
pub struct WarpProfile {
    spec: WarpProfileSpec,
    spline: Option<LogSpline>,
}

impl TryFrom<WarpProfileSpec> for WarpProfile {
    type Error = Error;
    fn try_from(spec: WarpProfileSpec) -> Result<Self> {
        let spline = match &spec {
            WarpProfileSpec::R { scale } if !(*scale > 0.0) || !scale.is_finite() => {
                return Err(Error::Model("profile r needs a positive scale".into()))
            }
            WarpProfileSpec::Const { value } if !(*value > 0.0) || !value.is_finite() => {
                return Err(Error::Model("profile const needs a positive value".into()))
            }
            WarpProfileSpec::CustomTable { r, f } => Some(LogSpline::new(r.clone(), f)?),
            _ => None,
        };
        Ok(WarpProfile { spec, spline })
    }
}

impl From<WarpProfile> for WarpProfileSpec {
    fn from(p: WarpProfile) -> Self {
        p.spec
    }
}

impl WarpProfile {
    pub fn linear(scale: f64) -> Self {
        WarpProfileSpec::R { scale }
            .try_into()
            .expect("positive scale")
    }

    pub fn exponential() -> Self {
        WarpProfileSpec::ExpR.try_into().expect("static profile")
    }

    pub fn constant(value: f64) -> Self {
        WarpProfileSpec::Const { value }
            .try_into()
            .expect("positive value")
    }

    pub fn table(r: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        WarpProfileSpec::CustomTable { r, f }.try_into()
    }

    pub fn spec(&self) -> &WarpProfileSpec {
        &self.spec
    }

    /// Interval on which the profile is defined.
    pub fn domain(&self) -> (f64, f64) {
        match &self.spec {
            WarpProfileSpec::CustomTable { r, .. } => (r[0], r[r.len() - 1]),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn derivs(&self, r: f64) -> WarpDerivs {
        match &self.spec {
            WarpProfileSpec::R { scale } => WarpDerivs {
                ln_f: (scale * r).ln(),
                d1: 1.0 / r,
                d2: 0.0,
                d3: 0.0,
            },
            WarpProfileSpec::ExpR => WarpDerivs {
                ln_f: r,
                d1: 1.0,
                d2: 1.0,
                d3: 1.0,
            },
            WarpProfileSpec::Const { value } => WarpDerivs {
                ln_f: value.ln(),
                d1: 0.0,
                d2: 0.0,
                d3: 0.0,
            },
            WarpProfileSpec::CustomTable { .. } => {
                let [y, y1, y2, y3] = self.spline.as_ref().expect("built on parse").eval(r);
                WarpDerivs {
                    ln_f: y,
                    d1: y1,
                    d2: y2 + y1 * y1,
                    d3: y3 + 3.0 * y1 * y2 + y1 * y1 * y1,
                }
            }
        }
    }

    /// Checks the supplied derivatives against central differences of the
    /// lower ones at the sample points; returns the worst relative error.
    pub fn derivative_consistency(&self, samples: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &r in samples {
            let h = 1e-5 * r.abs().max(1.0);
            let c = self.derivs(r);
            let f = c.f();
            // f' from f and f'' from f', by fourth-order differences
            let fd1 = crate::numerics::d1(|t| self.derivs(t).f(), r, h);
            let fd2 = crate::numerics::d1(|t| self.derivs(t).d1 * self.derivs(t).f(), r, h);
            let e1 = (fd1 - c.d1 * f).abs() / (c.d1 * f).abs().max(f * 1e-3).max(1e-300);
            let e2 = (fd2 - c.d2 * f).abs() / (c.d2 * f).abs().max(f * 1e-3).max(1e-300);
            worst = worst.max(e1).max(e2);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_profiles_have_consistent_derivatives() {
        let rs: Vec<f64> = (1..40).map(|i| 1.0 + 0.5 * i as f64).collect();
        for p in [
            WarpProfile::linear(1.0),
            WarpProfile::linear(2.5),
            WarpProfile::exponential(),
            WarpProfile::constant(3.0),
        ] {
            assert!(p.derivative_consistency(&rs) < 1e-6, "{:?}", p.spec());
        }
    }

    #[test]
    fn table_reproduces_smooth_profile() {
        let r: Vec<f64> = (0..400).map(|i| 0.5 + 0.25 * i as f64).collect();
        let f: Vec<f64> = r.iter().map(|x| x * x.sqrt()).collect();
        let p = WarpProfile::table(r, f).unwrap();
        let d = p.derivs(10.1);
        assert!((d.f() - 10.1f64.powf(1.5)).abs() / 10.1f64.powf(1.5) < 1e-8);
        assert!((d.d1 - 1.5 / 10.1).abs() < 1e-6);
        let rs: Vec<f64> = (1..20).map(|i| 2.0 + 3.3 * i as f64).collect();
        assert!(p.derivative_consistency(&rs) < 1e-6);
    }

    #[test]
    fn bad_tables_are_rejected() {
        assert!(WarpProfile::table(vec![1.0, 2.0], vec![1.0, 2.0]).is_err());
        assert!(WarpProfile::table(vec![1.0, 2.0, 2.0, 3.0], vec![1.0; 4]).is_err());
        assert!(WarpProfile::table(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, -1.0, 1.0, 1.0]).is_err());
        let bad: std::result::Result<WarpProfile, _> =
            serde_json::from_str(r#"{"profile":"const","value":0.0}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn profile_json_round_trip() {
        let p: WarpProfile = serde_json::from_str(r#"{"profile":"r"}"#).unwrap();
        assert_eq!(p, WarpProfile::linear(1.0));
        let s = serde_json::to_string(&WarpProfile::exponential()).unwrap();
        assert_eq!(s, r#"{"profile":"exp_r"}"#);
    }
}
