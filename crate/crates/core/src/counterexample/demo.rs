//! Genuine generalized eigenfunctions `phi_u = phi+ - R(lambda - i0)(H - lambda) phi+`
//! from a damped solve with an extrapolated `epsilon` ladder, and the plain
//! transported trace that fails to converge on them.

use super::{angular_state, hd_eigen, residual_decay, wkb_ansatz, Ansatz, ParabolicModel};
use crate::linalg::BandLu;
use crate::numerics::{fit_line, unwrap_phase};
use crate::{Error, Result, C64};
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug, Serialize)]
pub struct DemoSettings {
    /// Damping ladder `epsilon_1 > epsilon_2 > epsilon_3`, halving.
    pub eps: [f64; 3],
    /// Relative spread between the two first-level extrapolants above which
    /// the ladder is flagged.
    pub ladder_tol: f64,
}

impl Default for DemoSettings {
    fn default() -> Self {
        DemoSettings {
            eps: [1e-2, 5e-3, 2.5e-3],
            ladder_tol: 5e-2,
        }
    }
}

/// Regressor for the phase of the trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseModel {
    /// `ln r` (`kappa = 1/2`).
    Log,
    /// `r^{1 - 2 kappa}` (`kappa < 1/2`).
    Power,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSample {
    pub r: f64,
    pub value: C64,
    pub phase: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailureReport {
    pub kappa: f64,
    pub lambda: f64,
    pub k: usize,
    /// Richardson-refined eigenvalue of `H_D`.
    pub mu: f64,
    pub phase_model: PhaseModel,
    /// Slope of the trace phase against `ln r` (or `r^{1 - 2 kappa}`).
    pub log_slope_fit: f64,
    /// `-mu / sqrt(2 lambda)` (divided by `1 - 2 kappa` for the power model).
    pub predicted_log_slope: f64,
    pub slope_relative_error: f64,
    pub phase_r_squared: f64,
    /// Fit quality of the phase against `r` itself.
    pub linear_r_squared: f64,
    pub fit_range: (f64, f64),
    /// `None` when fewer than three complete shells lie beyond the cutoff.
    pub residual_exponent_fit: Option<f64>,
    /// `inf |xi(2r) - xi(r)| / |xi(r)|` over the last window `[Rmax/4, Rmax/2]`.
    pub nonconvergence_lower_bound: f64,
    pub ladder_spread: f64,
    pub ladder_converged: bool,
    #[serde(skip)]
    pub trace: Vec<PhaseSample>,
}

impl FailureReport {
    pub fn write_phase_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["r", "k", "re", "im", "phase"])?;
        for s in &self.trace {
            out.write_record(&[
                s.r.to_string(),
                self.k.to_string(),
                s.value.re.to_string(),
                s.value.im.to_string(),
                s.phase.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Decaying root of `mu + 1/mu = 2 - 2 h^2 e`.
fn damped_ratio(h: f64, e: C64) -> C64 {
    let c = C64::new(1.0, 0.0) - e * (h * h);
    let s = (c * c - 1.0).sqrt();
    let (a, b) = (c + s, c - s);
    if a.norm() < b.norm() {
        a
    } else {
        b
    }
}

/// Outgoing plain traces `xi(r)` on the radial nodes `1..n-1`, transported
/// with the mode-independent phase `b = sqrt(2 (lambda - q1))`.
fn plain_trace(model: &ParabolicModel, lambda: f64, v: &[C64]) -> Result<Vec<(f64, Vec<C64>)>> {
    let (n, m, h) = (model.n_radial(), model.n_angular(), model.h_r);
    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0;
    for j in 1..n - 1 {
        let e = lambda - model.q1[j];
        let c = 1.0 - h * h * e;
        if !(e > 0.0 && c > -1.0) {
            return Err(Error::Branch(format!(
                "plain phase undefined at r = {}: lambda - q1 = {e}",
                model.r[j]
            )));
        }
        let delta = c.acos();
        phase += delta;
        let kt = delta.sin() / h;
        let rot = C64::from_polar(0.5 / kt.sqrt(), -phase);
        let slice: Vec<C64> = (0..m)
            .map(|i| {
                let q = model.index(j, i);
                let a = (v[q + m] - v[q - m]) * C64::new(0.0, -0.5 / h);
                rot * (a + v[q] * kt)
            })
            .collect();
        out.push((model.r[j], slice));
    }
    Ok(out)
}

fn slice_distance(model: &ParabolicModel, a: &[C64], b: &[C64]) -> f64 {
    let d: Vec<C64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    model.slice_norm_sq(&d).sqrt()
}

/// Runs the demonstration for one angular state.
pub fn wkb_failure_demo(
    model: &ParabolicModel,
    lambda: f64,
    k: usize,
    settings: &DemoSettings,
) -> Result<FailureReport> {
    Ok(wkb_failure_demos(model, lambda, &[k], settings)?.remove(0))
}

/// Runs the demonstration for several angular states, sharing the
/// factorizations of the damped operators.
pub fn wkb_failure_demos(
    model: &ParabolicModel,
    lambda: f64,
    ks: &[usize],
    settings: &DemoSettings,
) -> Result<Vec<FailureReport>> {
    if model.kappa > 0.5 + 1e-12 {
        return Err(Error::Config(format!(
            "kappa = {} > 1/2: no generalized eigenfunction asymptotics are constructed",
            model.kappa
        )));
    }
    if ks.is_empty() {
        return Err(Error::Config("no angular states requested".into()));
    }
    let eps = settings.eps;
    if !(eps[0] > eps[1] && eps[1] > eps[2] && eps[2] > 0.0) {
        return Err(Error::Config(
            "damping ladder must be positive and decreasing".into(),
        ));
    }
    let n = model.n_radial();
    let mut ansatz = vec![];
    let mut sources = vec![];
    for &k in ks {
        let (mu, u) = angular_state(model, lambda, k, Ansatz::ModeCorrected)?;
        let phi = wkb_ansatz(model, lambda, k, &u, mu, Ansatz::ModeCorrected, None)?;
        let (v, ghost) = phi.samples();
        sources.push(model.apply(&v, &ghost, C64::new(lambda, 0.0)));
        ansatz.push((phi, v));
    }
    // w[eps][k] = R(lambda - i eps) g_k
    let mut w: Vec<Vec<Vec<C64>>> = vec![];
    for &e in &eps {
        let z = C64::new(lambda, -e);
        let ratio = damped_ratio(model.h_r, z - model.q1[n - 1]);
        let lu = BandLu::factor(&model.assemble(z, ratio))?;
        w.push(
            sources
                .iter()
                .map(|g| {
                    let mut x = g.clone();
                    lu.solve_in_place(&mut x);
                    x
                })
                .collect(),
        );
    }
    let mut reports = vec![];
    for (idx, &k) in ks.iter().enumerate() {
        let (phi, v) = &ansatz[idx];
        let (w1, w2, w3) = (&w[0][idx], &w[1][idx], &w[2][idx]);
        let combine = |c: [f64; 3]| -> Vec<C64> {
            (0..v.len())
                .map(|q| v[q] - (w1[q] * c[0] + w2[q] * c[1] + w3[q] * c[2]))
                .collect()
        };
        let phi_u = combine([1.0 / 3.0, -2.0, 8.0 / 3.0]);
        let phi_a = combine([-1.0, 2.0, 0.0]);
        let phi_b = combine([0.0, -1.0, 2.0]);
        let trace = plain_trace(model, lambda, &phi_u)?;
        let (lo, hi) = (2.0 * phi.cutoff_radius, model.r_max / 2.0);
        if lo > hi / 2.0 {
            return Err(Error::Resolution(format!(
                "fit range [{lo}, {hi}] too short; increase Rmax"
            )));
        }

        let (_, u) = angular_state(model, lambda, k, Ansatz::ModeCorrected)?;
        let samples: Vec<PhaseSample> = {
            let vals: Vec<(f64, C64)> = trace
                .iter()
                .map(|(r, s)| (*r, model.slice_inner(&u, s)))
                .collect();
            let ph = unwrap_phase(&vals.iter().map(|(_, z)| z.arg()).collect::<Vec<_>>());
            vals.iter()
                .zip(ph)
                .map(|((r, z), p)| PhaseSample {
                    r: *r,
                    value: *z,
                    phase: p,
                })
                .collect()
        };
        let in_range: Vec<&PhaseSample> =
            samples.iter().filter(|s| s.r >= lo && s.r <= hi).collect();
        let y: Vec<f64> = in_range.iter().map(|s| s.phase).collect();
        let (phase_model, xs): (PhaseModel, Vec<f64>) = if (model.kappa - 0.5).abs() < 1e-12 {
            (PhaseModel::Log, in_range.iter().map(|s| s.r.ln()).collect())
        } else {
            let p = 1.0 - 2.0 * model.kappa;
            (
                PhaseModel::Power,
                in_range.iter().map(|s| s.r.powf(p)).collect(),
            )
        };
        let fit = fit_line(&xs, &y);
        let lin = fit_line(&in_range.iter().map(|s| s.r).collect::<Vec<_>>(), &y);
        let mu = hd_eigen(model.kappa, lambda, k)?.mu;
        let predicted = match phase_model {
            PhaseModel::Log => -mu / (2.0 * lambda).sqrt(),
            PhaseModel::Power => -mu / ((1.0 - 2.0 * model.kappa) * (2.0 * lambda).sqrt()),
        };

        // last window [Rmax/4, Rmax/2]
        let last_r = trace.last().map(|t| t.0).unwrap_or(0.0);
        let at = |r: f64| -> Option<Vec<C64>> {
            let p = trace.partition_point(|t| t.0 < r);
            if p == 0 || p >= trace.len() {
                return None;
            }
            let (r0, r1) = (trace[p - 1].0, trace[p].0);
            let t = (r - r0) / (r1 - r0);
            Some(
                trace[p - 1]
                    .1
                    .iter()
                    .zip(&trace[p].1)
                    .map(|(a, b)| a * (1.0 - t) + b * t)
                    .collect(),
            )
        };
        let mut bound = f64::INFINITY;
        for (r, s) in &trace {
            if *r < model.r_max / 4.0 || *r > model.r_max / 2.0 || 2.0 * r > last_r {
                continue;
            }
            if let Some(s2) = at(2.0 * r) {
                let nrm = model.slice_norm_sq(s).sqrt();
                if nrm > 0.0 {
                    bound = bound.min(slice_distance(model, &s2, s) / nrm);
                }
            }
        }

        let ta = plain_trace(model, lambda, &phi_a)?;
        let tb = plain_trace(model, lambda, &phi_b)?;
        let (mut num, mut den) = (0.0, 0.0);
        for ((r, a), (_, b)) in ta.iter().zip(&tb) {
            if *r >= lo && *r <= hi {
                num += slice_distance(model, a, b).powi(2);
                den += model.slice_norm_sq(b);
            }
        }
        let spread = (num / den.max(f64::MIN_POSITIVE)).sqrt();
        let residual = match residual_decay(model, lambda, k, Ansatz::ModeCorrected) {
            Ok(r) => Some(r.exponent),
            Err(Error::Resolution(_)) => None,
            Err(e) => return Err(e),
        };
        reports.push(FailureReport {
            kappa: model.kappa,
            lambda,
            k,
            mu,
            phase_model,
            log_slope_fit: fit.slope,
            predicted_log_slope: predicted,
            slope_relative_error: ((fit.slope - predicted) / predicted).abs(),
            phase_r_squared: fit.r_squared,
            linear_r_squared: lin.r_squared,
            fit_range: (lo, hi),
            residual_exponent_fit: residual,
            nonconvergence_lower_bound: bound,
            ladder_spread: spread,
            ladder_converged: spread <= settings.ladder_tol,
            trace: samples,
        });
    }
    Ok(reports)
}
