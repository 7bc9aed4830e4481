//! The parabolic end where the generalized eigenfunctions are not of WKB type.
//!
//! The end `{r > r0, |theta| < 1}` of the half plane in the coordinates of
//! [`ParabolicChart`] is discretized on a tensor grid in `(r, theta)`. All
//! fields live in the conjugated gauge `v = |g|^{1/4} phi`, where the
//! operator is
//! `-1/2 (d_r N_r d_r + d_theta N_theta d_theta + W_r + W_theta)` with the
//! flat measure `dr dtheta`.

mod demo;
mod operator;

pub use demo::{wkb_failure_demo, wkb_failure_demos, DemoSettings, FailureReport, PhaseModel};
pub use operator::{residual_decay, ResidualDecay, ResidualShell};

use crate::geometry::{effective_potential, ManifoldModel, ParabolicChart};
use crate::linalg::{BandLu, BandMatrix};
use crate::modes::{Gauge, ModeFunction};
use crate::numerics::{chi_bar, integrate};
use crate::{Error, Result, C64};
use serde::Serialize;

/// Tensor grid on the parabolic end with the metric tables.
///
/// Radial nodes are `r0 + (j + 1) h_r` for `j = 0..n` (Dirichlet at `r0`,
/// last node at `Rmax`); angular nodes are the interior points of a uniform
/// grid on `[-1, 1]` (Dirichlet at `theta = +-1`). Node tables are stored
/// row-major as `[j * n_theta + i]`.
#[derive(Clone, Debug)]
pub struct ParabolicModel {
    pub kappa: f64,
    pub r0: f64,
    pub r_max: f64,
    pub h_r: f64,
    pub h_theta: f64,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub n_r: Vec<f64>,
    pub n_theta: Vec<f64>,
    pub w_r: Vec<f64>,
    pub w_theta: Vec<f64>,
    /// `N_r` at `(r0 + (f + 1/2) h_r, theta_i)`, `f = 0..=n`.
    pub n_r_face: Vec<f64>,
    /// `N_theta` at `(r_j, -1 + (f + 1/2) h_theta)`, `f = 0..=n_theta`.
    pub n_theta_face: Vec<f64>,
    /// `q1` along `theta = 0`, used by the plain mode-independent phase.
    pub q1: Vec<f64>,
}

impl ParabolicModel {
    pub fn new(kappa: f64, r0: f64, r_max: f64, h_r: f64, n_theta: usize) -> Result<Self> {
        Self::from_manifold(&ManifoldModel::parabolic(kappa, r0, r_max), h_r, n_theta)
    }

    pub fn from_manifold(model: &ManifoldModel, h_r: f64, n_theta: usize) -> Result<Self> {
        model.validate()?;
        let kappa = model
            .parabolic_kappa()
            .ok_or_else(|| Error::Model("model has no parabolic end".into()))?;
        if model.ends.len() != 1 {
            return Err(Error::Model(
                "the parabolic demo needs a single-end model".into(),
            ));
        }
        if !model.potential.is_zero() {
            return Err(Error::Config(
                "the two-dimensional parabolic operator is implemented for V = 0".into(),
            ));
        }
        let end = &model.ends[0];
        let (r0, r_max) = (end.r0, end.r_max);
        if !(h_r > 0.0 && h_r < r0) {
            return Err(Error::Config(format!(
                "radial spacing {h_r} must lie in (0, r0)"
            )));
        }
        let steps = (r_max - r0) / h_r;
        let n = steps.round() as usize;
        if (steps - n as f64).abs() > 1e-6 || n < 8 {
            return Err(Error::Config(format!(
                "Rmax - r0 = {} is not a multiple of h_r = {h_r}",
                r_max - r0
            )));
        }
        if n_theta < 7 || n_theta.is_multiple_of(2) {
            return Err(Error::Config(
                "angular grid needs an odd number >= 7 of interior nodes".into(),
            ));
        }
        let chart = ParabolicChart::new(kappa);
        let h_theta = 2.0 / (n_theta + 1) as f64;
        let r: Vec<f64> = (0..n).map(|j| r0 + (j + 1) as f64 * h_r).collect();
        let theta: Vec<f64> = (0..n_theta)
            .map(|i| -1.0 + (i + 1) as f64 * h_theta)
            .collect();
        let theta_face: Vec<f64> = (0..=n_theta)
            .map(|f| -1.0 + (f as f64 + 0.5) * h_theta)
            .collect();
        let size = n * n_theta;
        let (mut nr, mut nt, mut wr, mut wt) = (
            Vec::with_capacity(size),
            Vec::with_capacity(size),
            Vec::with_capacity(size),
            Vec::with_capacity(size),
        );
        let mut nt_face = Vec::with_capacity(n * (n_theta + 1));
        for &rj in &r {
            for &t in &theta {
                nr.push(chart.n_r(rj, t));
                nt.push(chart.n_theta(rj, t));
                wr.push(chart.w_r(rj, t));
                wt.push(chart.w_theta(rj, t));
            }
            for &t in &theta_face {
                nt_face.push(chart.n_theta(rj, t));
            }
        }
        let mut nr_face = Vec::with_capacity((n + 1) * n_theta);
        for f in 0..=n {
            let rf = r0 + (f as f64 + 0.5) * h_r;
            for &t in &theta {
                nr_face.push(chart.n_r(rf, t));
            }
        }
        let q1 = r
            .iter()
            .map(|rj| effective_potential(model, 0, (*rj, 0.0)).map(|p| p.q1))
            .collect::<Result<Vec<f64>>>()?;
        Ok(ParabolicModel {
            kappa,
            r0,
            r_max,
            h_r,
            h_theta,
            r,
            theta,
            n_r: nr,
            n_theta: nt,
            w_r: wr,
            w_theta: wt,
            n_r_face: nr_face,
            n_theta_face: nt_face,
            q1,
        })
    }

    pub fn n_radial(&self) -> usize {
        self.r.len()
    }

    pub fn n_angular(&self) -> usize {
        self.theta.len()
    }

    pub fn chart(&self) -> ParabolicChart {
        ParabolicChart::new(self.kappa)
    }

    /// Index of node `(j, i)` in the row-major tables.
    pub fn index(&self, j: usize, i: usize) -> usize {
        j * self.theta.len() + i
    }

    /// Index of the radial node closest to `r`.
    pub fn nearest(&self, r: f64) -> usize {
        let j = ((r - self.r0) / self.h_r).round() as i64 - 1;
        j.clamp(0, self.r.len() as i64 - 1) as usize
    }

    /// `L^2(dtheta)` norm squared of one angular slice.
    pub fn slice_norm_sq(&self, v: &[C64]) -> f64 {
        v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.h_theta
    }

    /// `<a, b>` in `L^2(dtheta)`, antilinear in `a`.
    pub fn slice_inner(&self, a: &[f64], b: &[C64]) -> C64 {
        a.iter().zip(b).map(|(x, y)| y * *x).sum::<C64>() * self.h_theta
    }
}

/// Which angular operator `H_D` applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaRegime {
    /// `H_D = -1/2 d_theta^2`.
    Below,
    /// `H_D = -1/2 d_theta^2 - lambda theta^2 / 4`.
    Half,
}

impl KappaRegime {
    pub fn of(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::Config(format!("kappa = {kappa} outside (0, 1)")));
        }
        if (kappa - 0.5).abs() < 1e-12 {
            Ok(KappaRegime::Half)
        } else if kappa < 0.5 {
            Ok(KappaRegime::Below)
        } else {
            Err(Error::Config(format!(
                "no angular eigenproblem is attached to kappa = {kappa} > 1/2"
            )))
        }
    }
}

/// Dirichlet eigenpair of `H_D` on `(-1, 1)`.
#[derive(Clone, Debug, Serialize)]
pub struct HdEigen {
    pub regime: KappaRegime,
    pub lambda: Option<f64>,
    pub k: usize,
    /// Richardson-refined eigenvalue.
    pub mu: f64,
    /// Eigenvalue of the finite-difference matrix on `theta`.
    pub mu_grid: f64,
    /// Grid including the endpoints.
    pub theta: Vec<f64>,
    /// Eigenvector on `theta`, zero at the endpoints, unit in `L^2(dtheta)`.
    pub u: Vec<f64>,
}

pub const HD_POINTS: usize = 801;

/// Eigenpair `k >= 1` of `H_D` on the default grid.
pub fn hd_eigen(kappa: f64, lambda: f64, k: usize) -> Result<HdEigen> {
    hd_eigen_on(kappa, lambda, k, HD_POINTS)
}

/// Eigenpair `k >= 1` of `H_D` on a uniform grid with `n_points` points
/// (endpoints included); the eigenvalue is Richardson-refined against the
/// grid with half as many cells.
pub fn hd_eigen_on(kappa: f64, lambda: f64, k: usize, n_points: usize) -> Result<HdEigen> {
    let regime = KappaRegime::of(kappa)?;
    let c = match regime {
        KappaRegime::Half => lambda / 4.0,
        KappaRegime::Below => 0.0,
    };
    let (mu_grid, theta, u) = dirichlet_pair(c, k, n_points)?;
    let (coarse, _, _) = dirichlet_pair(c, k, n_points.div_ceil(2))?;
    Ok(HdEigen {
        regime,
        lambda: matches!(regime, KappaRegime::Half).then_some(lambda),
        k,
        mu: (4.0 * mu_grid - coarse) / 3.0,
        mu_grid,
        theta,
        u,
    })
}

/// Eigenpair `k` of `-1/2 D^2 - c theta^2` with Dirichlet ends.
fn dirichlet_pair(c: f64, k: usize, n_points: usize) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if n_points < 9 || n_points.is_multiple_of(2) {
        return Err(Error::Config(
            "angular grid needs an odd number of points >= 9".into(),
        ));
    }
    if k == 0 || k > (n_points - 1) / 4 {
        return Err(Error::Resolution(format!(
            "eigenstate {k} is not resolved by {n_points} angular points"
        )));
    }
    let n = n_points - 2;
    let h = 2.0 / (n_points - 1) as f64;
    let theta: Vec<f64> = (0..n_points).map(|j| -1.0 + j as f64 * h).collect();
    let diag: Vec<f64> = (0..n)
        .map(|i| 1.0 / (h * h) - c * theta[i + 1].powi(2))
        .collect();
    let off = -0.5 / (h * h);
    let mu = kth_eigenvalue(&diag, off, k);
    // inverse iteration with a shift just below the eigenvalue
    let shift = mu - 1e-9 * mu.abs().max(1.0);
    let mut a = BandMatrix::zeros(n, 1, 1);
    for i in 0..n {
        a.set(i, i, C64::new(diag[i] - shift, 0.0));
        if i + 1 < n {
            a.set(i, i + 1, C64::new(off, 0.0));
            a.set(i + 1, i, C64::new(off, 0.0));
        }
    }
    let lu = BandLu::factor(&a)?;
    let mut v: Vec<C64> = (0..n)
        .map(|i| C64::new(1.0 + 0.1 * (i as f64).sin(), 0.0))
        .collect();
    for _ in 0..3 {
        lu.solve_in_place(&mut v);
        let s = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|z| *z /= s);
    }
    let sgn = if v[0].re < 0.0 { -1.0 } else { 1.0 };
    let mut u = vec![0.0; n_points];
    for i in 0..n {
        u[i + 1] = sgn * v[i].re / h.sqrt();
    }
    Ok((mu, theta, u))
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix with
/// constant off-diagonal (Sturm sequence).
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        q = d - x - if i == 0 { 0.0 } else { off * off / q };
        if q == 0.0 {
            q = f64::EPSILON * (d.abs() + off.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn kth_eigenvalue(diag: &[f64], off: f64, k: usize) -> f64 {
    let lo0 = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs();
    let hi0 = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs();
    let (mut lo, mut hi) = (lo0, hi0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(diag, off, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Radial phase used by the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ansatz {
    /// `b = sqrt(2 (lambda - mu r^{-2 kappa}))` with the `H_D` eigenvalue.
    ModeCorrected,
    /// `b = sqrt(2 lambda)`, no angular correction.
    Plain,
}

/// Approximate outgoing eigenfunction `chi_bar b^{-1/2} e^{i int b} u(theta)`
/// in the conjugated gauge.
#[derive(Clone, Debug)]
pub struct ApproxEigenfunction {
    pub kappa: f64,
    pub lambda: f64,
    pub k: usize,
    pub ansatz: Ansatz,
    /// Eigenvalue entering `b` (the grid value, so that the discrete angular
    /// operator reproduces it exactly).
    pub mu: f64,
    pub cutoff_radius: f64,
    /// Radial coefficient of `u` on the radial nodes (label `k`).
    pub profile: ModeFunction,
    /// Coefficient at the ghost node `Rmax + h_r`.
    pub ghost: C64,
    /// Angular profile on the interior angular nodes.
    pub angular: Vec<f64>,
    /// Grid-matched phase on the radial nodes.
    pub grid_phase: Vec<f64>,
}

impl ApproxEigenfunction {
    /// Samples on the tensor grid, row-major, and the ghost row.
    pub fn samples(&self) -> (Vec<C64>, Vec<C64>) {
        let rows = self.profile.u[0]
            .iter()
            .flat_map(|c| self.angular.iter().map(move |a| c * *a))
            .collect();
        let ghost = self.angular.iter().map(|a| self.ghost * *a).collect();
        (rows, ghost)
    }

    /// `b(r)` of the continuum ansatz.
    pub fn b(&self, r: f64) -> f64 {
        (2.0 * energy(self.lambda, self.mu, self.kappa, self.ansatz, r).max(0.0)).sqrt()
    }

    /// Continuum phase `int_{R_c}^r b` by adaptive quadrature.
    pub fn phase_integral(&self, r: f64) -> f64 {
        integrate(&|s: f64| self.b(s), self.cutoff_radius, r, 1e-12)
    }
}

/// `b^2 / 2` of the ansatz at radius `r`.
fn energy(lambda: f64, mu: f64, kappa: f64, ansatz: Ansatz, r: f64) -> f64 {
    match ansatz {
        Ansatz::ModeCorrected => lambda - mu * r.powf(-2.0 * kappa),
        Ansatz::Plain => lambda,
    }
}

/// Default cutoff: the smallest `2^n >= 2 r0` with `mu R^{-2 kappa} <= lambda / 2`.
pub fn default_cutoff(model: &ParabolicModel, lambda: f64, mu: f64, ansatz: Ansatz) -> f64 {
    let mut rc = 1.0;
    while rc < 2.0 * model.r0
        || (ansatz == Ansatz::ModeCorrected && mu * rc.powf(-2.0 * model.kappa) > 0.5 * lambda)
    {
        rc *= 2.0;
    }
    rc
}

/// The approximate outgoing eigenfunction built on the `k`-th eigenstate of
/// `H_D`, with the default cutoff.
pub fn approx_eigenfunction(
    model: &ParabolicModel,
    lambda: f64,
    k: usize,
) -> Result<ApproxEigenfunction> {
    let (mu, u) = angular_state(model, lambda, k, Ansatz::ModeCorrected)?;
    wkb_ansatz(model, lambda, k, &u, mu, Ansatz::ModeCorrected, None)
}

/// Eigenpair of the discrete angular operator on the model's grid; the plain
/// ansatz uses the Dirichlet Laplacian for every `kappa`.
pub(crate) fn angular_state(
    model: &ParabolicModel,
    lambda: f64,
    k: usize,
    ansatz: Ansatz,
) -> Result<(f64, Vec<f64>)> {
    let n_points = model.n_angular() + 2;
    let (mu, _, u) = match ansatz {
        Ansatz::ModeCorrected => {
            let e = hd_eigen_on(model.kappa, lambda, k, n_points)?;
            (e.mu_grid, e.theta, e.u)
        }
        Ansatz::Plain => dirichlet_pair(0.0, k, n_points)?,
    };
    Ok((mu, u[1..n_points - 1].to_vec()))
}

/// General ansatz with an arbitrary angular profile (on the interior angular
/// nodes) and eigenvalue `mu`.
pub fn wkb_ansatz(
    model: &ParabolicModel,
    lambda: f64,
    k: usize,
    angular: &[f64],
    mu: f64,
    ansatz: Ansatz,
    cutoff: Option<f64>,
) -> Result<ApproxEigenfunction> {
    if lambda <= 0.0 {
        return Err(Error::Spectral(format!(
            "lambda = {lambda} must be positive"
        )));
    }
    if angular.len() != model.n_angular() {
        return Err(Error::Shape(format!(
            "angular profile has {} entries, grid has {}",
            angular.len(),
            model.n_angular()
        )));
    }
    if ansatz == Ansatz::ModeCorrected && model.kappa > 0.5 + 1e-12 {
        return Err(Error::Config(
            "no mode-corrected ansatz for kappa > 1/2; only the plain residual is defined there"
                .into(),
        ));
    }
    let rc = cutoff.unwrap_or_else(|| default_cutoff(model, lambda, mu, ansatz));
    let h = model.h_r;
    let n = model.n_radial();
    // faces f = 0..=n+1 at r0 + (f + 1/2) h; nodes 0..=n (n is the ghost)
    let delta: Vec<Option<f64>> = (0..=n + 1)
        .map(|f| {
            let rf = model.r0 + (f as f64 + 0.5) * h;
            let e = energy(lambda, mu, model.kappa, ansatz, rf);
            let c = 1.0 - h * h * e;
            (e > 0.0 && c > -1.0).then(|| c.acos())
        })
        .collect();
    let node_r = |j: usize| model.r0 + (j + 1) as f64 * h;
    let mut phase = vec![0.0; n + 1];
    let mut coef = vec![C64::new(0.0, 0.0); n + 1];
    for j in 0..=n {
        phase[j] = if j == 0 {
            0.0
        } else {
            phase[j - 1] + delta[j].unwrap_or(0.0)
        };
        let cut = chi_bar(node_r(j), rc);
        if cut == 0.0 {
            continue;
        }
        let (lo, hi) = match (delta[j], delta[j + 1]) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Branch(format!(
                    "b^2 = 2 (lambda - mu r^(-2 kappa)) is not positive and resolved near r = {}; cutoff {rc} too small",
                    node_r(j)
                )))
            }
        };
        let amp = ((lo.sin() / h) * (hi.sin() / h)).powf(-0.25);
        coef[j] = C64::from_polar(cut * amp, phase[j]);
    }
    let ghost = coef[n];
    coef.truncate(n);
    phase.truncate(n);
    let profile = ModeFunction {
        gauge: Gauge::HalfDensity,
        x: model.r.clone(),
        end: vec![0; n],
        r: model.r.clone(),
        labels: vec![k as i64],
        u: vec![coef],
    };
    Ok(ApproxEigenfunction {
        kappa: model.kappa,
        lambda,
        k,
        ansatz,
        mu,
        cutoff_radius: rc,
        profile,
        ghost,
        angular: angular.to_vec(),
        grid_phase: phase,
    })
}
