//! Five-point discretization of the conjugated operator and the residual of
//! the approximate eigenfunctions.

use super::{angular_state, wkb_ansatz, Ansatz, ParabolicModel};
use crate::linalg::BandMatrix;
use crate::numerics::{fit_power, LineFit};
use crate::{Error, Result, C64};
use serde::Serialize;

impl ParabolicModel {
    /// `(H - z) v` on every node; `ghost` is the slice at `Rmax + h_r`.
    pub fn apply(&self, v: &[C64], ghost: &[C64], z: C64) -> Vec<C64> {
        let (n, m) = (self.n_radial(), self.n_angular());
        let (hr2, ht2) = (self.h_r * self.h_r, self.h_theta * self.h_theta);
        let zero = C64::new(0.0, 0.0);
        let mut out = vec![zero; n * m];
        for j in 0..n {
            for i in 0..m {
                let k = self.index(j, i);
                let c = v[k];
                let up = if j + 1 < n { v[k + m] } else { ghost[i] };
                let dn = if j > 0 { v[k - m] } else { zero };
                let right = if i + 1 < m { v[k + 1] } else { zero };
                let left = if i > 0 { v[k - 1] } else { zero };
                let (fu, fd) = (self.n_r_face[(j + 1) * m + i], self.n_r_face[j * m + i]);
                let (tu, td) = (
                    self.n_theta_face[j * (m + 1) + i + 1],
                    self.n_theta_face[j * (m + 1) + i],
                );
                let lap = (fu * (up - c) - fd * (c - dn)) / hr2
                    + (tu * (right - c) - td * (c - left)) / ht2
                    + c * (self.w_r[k] + self.w_theta[k]);
                out[k] = -0.5 * lap - z * c;
            }
        }
        out
    }

    /// Matrix of `H - z` with the outer ghost slice replaced by
    /// `ratio * v` (a scalar step ratio, the same for every angular node).
    pub fn assemble(&self, z: C64, ratio: C64) -> BandMatrix {
        let (n, m) = (self.n_radial(), self.n_angular());
        let (hr2, ht2) = (self.h_r * self.h_r, self.h_theta * self.h_theta);
        let mut a = BandMatrix::zeros(n * m, m, m);
        for j in 0..n {
            for i in 0..m {
                let k = self.index(j, i);
                let (fu, fd) = (self.n_r_face[(j + 1) * m + i], self.n_r_face[j * m + i]);
                let (tu, td) = (
                    self.n_theta_face[j * (m + 1) + i + 1],
                    self.n_theta_face[j * (m + 1) + i],
                );
                let mut diag = C64::new(
                    0.5 * ((fu + fd) / hr2 + (tu + td) / ht2 - self.w_r[k] - self.w_theta[k]),
                    0.0,
                ) - z;
                if j + 1 < n {
                    a.set(k, k + m, C64::new(-0.5 * fu / hr2, 0.0));
                } else {
                    diag -= ratio * (0.5 * fu / hr2);
                }
                if j > 0 {
                    a.set(k, k - m, C64::new(-0.5 * fd / hr2, 0.0));
                }
                if i + 1 < m {
                    a.set(k, k + 1, C64::new(-0.5 * tu / ht2, 0.0));
                }
                if i > 0 {
                    a.set(k, k - 1, C64::new(-0.5 * td / ht2, 0.0));
                }
                a.set(k, k, diag);
            }
        }
        a
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualShell {
    pub nu: i32,
    pub r_lo: f64,
    pub r_hi: f64,
    /// `R^{-1/2} |F_nu (H - lambda) phi|`.
    pub scaled: f64,
    /// The same for `(H - lambda N_r) phi`.
    pub scaled_nr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualDecay {
    pub kappa: f64,
    pub lambda: f64,
    pub k: usize,
    pub ansatz: Ansatz,
    pub mu: f64,
    pub cutoff_radius: f64,
    pub shells: Vec<ResidualShell>,
    /// Fitted `p` in `R^{-1/2} |F_nu (H - lambda) phi| ~ R^{-p}`.
    pub exponent: f64,
    pub exponent_r_squared: f64,
    /// The same fit for `(H - lambda N_r) phi`.
    pub exponent_nr: f64,
    /// `p > 1`: the shell series of the `B` norm converges.
    pub in_b: bool,
}

/// Shell norms of `(H - lambda) phi+` from the two-dimensional operator and
/// the fitted decay exponent. Shells start at twice the cutoff radius, where
/// the cutoff is identically one.
pub fn residual_decay(
    model: &ParabolicModel,
    lambda: f64,
    k: usize,
    ansatz: Ansatz,
) -> Result<ResidualDecay> {
    let (mu, u) = angular_state(model, lambda, k, ansatz)?;
    if k > (model.n_angular() + 1) / 4 {
        return Err(Error::Resolution(format!(
            "angular state {k} is not resolved by {} angular nodes",
            model.n_angular()
        )));
    }
    let phi = wkb_ansatz(model, lambda, k, &u, mu, ansatz, None)?;
    let (v, ghost) = phi.samples();
    let res = model.apply(&v, &ghost, C64::new(lambda, 0.0));
    let m = model.n_angular();
    let mut shells = vec![];
    let mut lo = 2.0 * phi.cutoff_radius;
    while 2.0 * lo <= model.r_max {
        let (mut s, mut s_nr) = (0.0, 0.0);
        for j in 0..model.n_radial() {
            if model.r[j] < lo || model.r[j] >= 2.0 * lo {
                continue;
            }
            for i in 0..m {
                let q = model.index(j, i);
                let full = res[q];
                let nr = full + v[q] * (lambda * (1.0 - model.n_r[q]));
                s += full.norm_sqr();
                s_nr += nr.norm_sqr();
            }
        }
        let w = model.h_r * model.h_theta / lo;
        shells.push(ResidualShell {
            nu: lo.log2().round() as i32,
            r_lo: lo,
            r_hi: 2.0 * lo,
            scaled: (s * w).sqrt(),
            scaled_nr: (s_nr * w).sqrt(),
        });
        lo *= 2.0;
    }
    if shells.len() < 3 {
        return Err(Error::Resolution(format!(
            "only {} complete dyadic shells beyond twice the cutoff {}; increase Rmax",
            shells.len(),
            phi.cutoff_radius
        )));
    }
    let rs: Vec<f64> = shells.iter().map(|s| s.r_lo).collect();
    let fit: LineFit = fit_power(&rs, &shells.iter().map(|s| s.scaled).collect::<Vec<_>>());
    let fit_nr = fit_power(&rs, &shells.iter().map(|s| s.scaled_nr).collect::<Vec<_>>());
    Ok(ResidualDecay {
        kappa: model.kappa,
        lambda,
        k,
        ansatz,
        mu,
        cutoff_radius: phi.cutoff_radius,
        shells,
        exponent: -fit.slope,
        exponent_r_squared: fit.r_squared,
        exponent_nr: -fit_nr.slope,
        in_b: -fit.slope > 1.0,
    })
}
