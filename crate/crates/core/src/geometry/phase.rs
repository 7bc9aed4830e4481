//! Critical energy, the cutoff radius `r_lambda` and the asymptotic phases
//! `b` and `a`.

use super::metric::EndEvaluator;
use super::{LineGeometry, ManifoldModel};
use crate::numerics::{aitken, chi, csqrt, d1, gauss3};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};

/// Outgoing (`+`, `R(lambda + i0)`) or incoming (`-`, `R(lambda - i0)`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalEnergy {
    pub lambda0: f64,
    /// Suprema of `q1` over the dyadic shells of each end, innermost first.
    pub shell_sups: Vec<Vec<f64>>,
    /// `q1` still varies by more than 10% across the last two shells.
    pub unreliable: bool,
}

const SHELL_SAMPLES: usize = 33;
const THETA_SAMPLES: usize = 17;

/// Dyadic shells `[2^nu, 2^{nu+1}]` inside `[lo, hi]`; falls back to the
/// whole interval when no full shell fits.
pub(crate) fn dyadic_shells(lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut out = vec![];
    let mut nu = lo.log2().ceil() as i32;
    while 2f64.powi(nu + 1) <= hi * (1.0 + 1e-12) {
        out.push((2f64.powi(nu), 2f64.powi(nu + 1)));
        nu += 1;
    }
    if out.is_empty() {
        out.push((lo, hi));
    }
    out
}

fn shell_sup(ev: &EndEvaluator, lo: f64, hi: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let thetas = ev.theta_samples(THETA_SAMPLES);
    let mut s = f64::NEG_INFINITY;
    for i in 0..SHELL_SAMPLES {
        let r = lo * (hi / lo).powf(i as f64 / (SHELL_SAMPLES - 1) as f64);
        let r = r.clamp(lo, hi);
        for &t in &thetas {
            s = s.max(f(r, t));
        }
    }
    s
}

/// `lambda0 = limsup q1`, estimated from the outermost dyadic shells of every
/// end (Aitken extrapolation of the last three shell suprema).
pub fn critical_energy(model: &ManifoldModel) -> Result<CriticalEnergy> {
    let mut lambda0 = f64::NEG_INFINITY;
    let mut sups = vec![];
    let mut unreliable = false;
    for end in 0..model.ends.len() {
        let ev = EndEvaluator::new(model, end)?;
        let shells = dyadic_shells(ev.r0(), ev.r_max());
        let s: Vec<f64> = shells
            .iter()
            .map(|&(a, b)| shell_sup(&ev, a, b, |r, t| ev.q1(r, t)))
            .collect();
        let n = s.len();
        let est = if n >= 3 {
            aitken(s[n - 3], s[n - 2], s[n - 1])
        } else {
            s[n - 1]
        };
        if n < 2 {
            unreliable = true;
        } else {
            let var = (s[n - 1] - s[n - 2]).abs() / s[n - 1].abs().max(1e-4);
            if var > 0.1 {
                unreliable = true;
            }
        }
        lambda0 = lambda0.max(est);
        sups.push(s);
    }
    Ok(CriticalEnergy {
        lambda0,
        shell_sups: sups,
        unreliable,
    })
}

/// Per-end cutoff radius: twice the smallest sampled radius beyond which
/// `lambda + lambda0 - 2 q1 >= 0` holds, and at least `2 r0`.
pub fn r_lambda(model: &ManifoldModel, lambda: f64, lambda0: f64) -> Result<Vec<f64>> {
    if !(lambda > lambda0) {
        return Err(Error::Spectral(format!(
            "lambda = {lambda} must exceed the critical energy {lambda0}"
        )));
    }
    let mut out = vec![];
    for end in 0..model.ends.len() {
        let ev = EndEvaluator::new(model, end)?;
        let (lo, hi) = (0.5 * ev.r0(), ev.r_max());
        let n = 512;
        let thetas = ev.theta_samples(THETA_SAMPLES);
        let mut r_star = lo;
        for i in (0..n).rev() {
            let r = (lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).clamp(lo, hi);
            let ok = thetas
                .iter()
                .all(|&t| lambda + lambda0 - 2.0 * ev.q1(r, t) >= 0.0);
            if !ok {
                let next = lo * (hi / lo).powf((i + 1) as f64 / (n - 1) as f64);
                r_star = next.min(hi);
                break;
            }
        }
        out.push(2.0 * r_star.max(ev.r0()));
    }
    Ok(out)
}

/// `eta_lambda = 1 - chi(2 r / r_lambda)`.
pub fn eta_lambda(r: f64, r_lambda: f64) -> f64 {
    1.0 - chi(2.0 * r / r_lambda)
}

/// Phase evaluation context for one end at a fixed spectral parameter.
pub(crate) struct EndPhase {
    ev: EndEvaluator,
    r_lambda: f64,
    z: C64,
}

impl EndPhase {
    pub(crate) fn new(model: &ManifoldModel, end: usize, z: C64) -> Result<Self> {
        let ce = critical_energy(model)?;
        let rl = r_lambda(model, z.re, ce.lambda0)?;
        Ok(EndPhase {
            ev: EndEvaluator::new(model, end)?,
            r_lambda: rl[end],
            z,
        })
    }

    pub(crate) fn with_r_lambda(ev: EndEvaluator, z: C64, r_lambda: f64) -> Self {
        EndPhase { ev, r_lambda, z }
    }

    /// `(b, b~)` with `b~ = eta~ b`.
    pub(crate) fn b(&self, r: f64, theta: f64) -> (C64, C64) {
        let el = eta_lambda(r, self.r_lambda);
        if el == 0.0 {
            return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        }
        let dr2 = self.ev.dr2(r, theta);
        let q1 = self.ev.q1(r, theta);
        let b = csqrt(2.0 * (self.z - q1)) * (el * dr2.sqrt());
        (b, b * (self.ev.eta(r).0 / dr2))
    }

    /// `(a, a~)` for the given sign.
    pub(crate) fn a(&self, sign: Sign, r: f64, theta: f64) -> (C64, C64) {
        let (b, _) = self.b(r, theta);
        let el = eta_lambda(r, self.r_lambda);
        if el == 0.0 {
            return (b, b);
        }
        let dr2 = self.ev.dr2(r, theta);
        let q1 = self.ev.q1(r, theta);
        let dq1 = d1(|s| self.ev.q1(s, theta), r, 1e-3 * r);
        let corr = C64::new(0.0, -0.25 * sign.value() * el * dr2 * dq1) / (self.z - q1);
        let a = b + corr;
        (a, a * (self.ev.eta(r).0 / dr2))
    }

    fn riccati(&self, sign: Sign, r: f64, theta: f64) -> f64 {
        let dr2 = self.ev.dr2(r, theta);
        let q1 = self.ev.q1(r, theta);
        let h = 1e-3 * r;
        let a = |s: f64| self.a(sign, s, theta).0;
        let da = (-a(r + 2.0 * h) + a(r + h) * 8.0 - a(r - h) * 8.0 + a(r - 2.0 * h)) / (12.0 * h);
        let pa = C64::new(0.0, -1.0) * da * dr2;
        let v = a(r);
        (pa * sign.value() + v * v - (self.z - q1) * (2.0 * dr2)).norm()
    }
}

/// `(b, b~)` at a chart point, with `b = eta_lambda |dr| sqrt(2 (z - q1))`.
pub fn phase_b(model: &ManifoldModel, end: usize, z: C64, point: (f64, f64)) -> Result<(C64, C64)> {
    let p = EndPhase::new(model, end, z)?;
    p.ev.potential(point.0, point.1)?;
    Ok(p.b(point.0, point.1))
}

/// `(a, a~)` at a chart point, with
/// `a = b -/+ (i/4) eta_lambda grad^r q1 / (z - q1)`.
pub fn phase_a(
    model: &ManifoldModel,
    end: usize,
    z: C64,
    sign: Sign,
    point: (f64, f64),
) -> Result<(C64, C64)> {
    let p = EndPhase::new(model, end, z)?;
    p.ev.potential(point.0, point.1)?;
    Ok(p.a(sign, point.0, point.1))
}

/// `|(+/-) p^r a + a^2 - 2 |dr|^2 (z - q1)|` at a chart point.
pub fn riccati_residual(
    model: &ManifoldModel,
    end: usize,
    z: C64,
    sign: Sign,
    point: (f64, f64),
) -> Result<f64> {
    let p = EndPhase::new(model, end, z)?;
    p.ev.potential(point.0, point.1)?;
    Ok(p.riccati(sign, point.0, point.1))
}

/// Phase data on the nodes of a line grid at a real energy.
#[derive(Clone, Debug)]
pub struct PhaseTable {
    pub lambda: f64,
    pub lambda0: f64,
    pub r_lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub end: Vec<usize>,
    pub q1: Vec<f64>,
    pub eta_lambda: Vec<f64>,
    /// Wavenumber in the line coordinate, `eta_lambda sqrt(2 (lambda - q1))`.
    pub k: Vec<f64>,
    /// `b = k |dr/dx|`.
    pub b: Vec<f64>,
    /// `int k dx` from the reference sphere of the node's end, outward.
    pub phi: Vec<f64>,
}

impl PhaseTable {
    pub fn new(geom: &LineGeometry, x: &[f64], lambda: f64, lambda0: f64) -> Result<Self> {
        let rl = r_lambda(&geom.model, lambda, lambda0)?;
        let k_at = |t: f64| -> Result<f64> {
            let end = geom.end_of(t);
            let el = eta_lambda(geom.r(t).r, rl[end]);
            if el == 0.0 {
                return Ok(0.0);
            }
            let d = lambda - geom.q1(t);
            if d <= 0.0 {
                return Err(Error::Branch(format!(
                    "lambda - q1 = {d} <= 0 at x = {t} inside the cutoff support"
                )));
            }
            Ok(el * (2.0 * d).sqrt())
        };
        let n = x.len();
        let mut t = PhaseTable {
            lambda,
            lambda0,
            r_lambda: rl.clone(),
            x: x.to_vec(),
            end: Vec::with_capacity(n),
            q1: Vec::with_capacity(n),
            eta_lambda: Vec::with_capacity(n),
            k: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            phi: vec![0.0; n],
        };
        for &xi in x {
            let end = geom.end_of(xi);
            let rd = geom.r(xi);
            t.end.push(end);
            t.q1.push(geom.q1(xi));
            t.eta_lambda.push(eta_lambda(rd.r, rl[end]));
            let k = k_at(xi)?;
            t.k.push(k);
            t.b.push(k * rd.r1.abs());
        }
        // cumulative integral from the left; k vanishes between the reference
        // spheres, so the constant of each end is read off there
        let mut cum = vec![0.0; n];
        for i in 1..n {
            let (a, b) = (x[i - 1], x[i]);
            let v = gauss3(|s| k_at(s).unwrap_or(f64::NAN), a, b);
            if v.is_nan() {
                k_at(a)?;
                k_at(b)?;
                return Err(Error::Branch(format!("lambda <= q1 inside [{a}, {b}]")));
            }
            cum[i] = cum[i - 1] + v;
        }
        for e in 0..geom.n_ends() {
            let xr = geom.x_ref(e);
            let s = geom.outward(e);
            // innermost node at or inside the reference sphere
            let i0 = (0..n)
                .filter(|&i| s * (x[i] - xr) <= 1e-12)
                .min_by(|&i, &j| (x[i] - xr).abs().partial_cmp(&(x[j] - xr).abs()).unwrap())
                .unwrap_or(0);
            let c0 = cum[i0];
            for i in 0..n {
                if t.end[i] == e {
                    t.phi[i] = s * (cum[i] - c0);
                }
            }
        }
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngularSpace, EndChart, Potential, WarpProfile};

    fn warped(f: WarpProfile, v: Potential) -> ManifoldModel {
        ManifoldModel::single(EndChart::warped(2, f, AngularSpace::Circle, 1.0, 256.0), v)
    }

    #[test]
    fn critical_energies() {
        let e = critical_energy(&warped(WarpProfile::linear(1.0), Potential::Zero)).unwrap();
        assert_eq!(e.lambda0, 0.0);
        assert!(!e.unreliable);
        let h = critical_energy(&warped(WarpProfile::exponential(), Potential::Zero)).unwrap();
        assert!((h.lambda0 - 0.125).abs() < 1e-10);
        // a short-range potential does not enter q1, so the oracle is the
        // direct supremum of the curvature part over the last shell
        let v = critical_energy(&warped(
            WarpProfile::linear(1.0),
            Potential::ExpDecay {
                amplitude: 3.0,
                rate: 1.0,
            },
        ))
        .unwrap();
        assert!(v.lambda0.abs() < 1e-12);
        let last = *v.shell_sups[0].last().unwrap();
        assert!((last + 1.0 / (8.0 * 256.0 * 256.0)).abs() < 1e-15);
    }

    #[test]
    fn inverse_r_potential_extrapolates_to_zero() {
        let m = warped(
            WarpProfile::linear(1.0),
            Potential::InverseR { amplitude: 1.0 },
        );
        let e = critical_energy(&m).unwrap();
        assert!(e.lambda0.abs() < 1e-3, "{}", e.lambda0);
    }

    #[test]
    fn b_and_a_on_the_cone() {
        let m = warped(WarpProfile::linear(1.0), Potential::Zero);
        let (b, _) = phase_b(&m, 0, C64::new(2.0, 0.0), (200.0, 0.0)).unwrap();
        assert!((b.re - 2.0).abs() < 1e-5 && b.im.abs() < 1e-15);
        let r = 50.0;
        let lam = 0.5;
        let q1 = -1.0 / (8.0 * r * r);
        let dq1 = 1.0 / (4.0 * r * r * r);
        for sign in [Sign::Plus, Sign::Minus] {
            let (a, _) = phase_a(&m, 0, C64::new(lam, 0.0), sign, (r, 0.0)).unwrap();
            let (b, _) = phase_b(&m, 0, C64::new(lam, 0.0), (r, 0.0)).unwrap();
            let expect = -sign.value() * 0.25 * dq1 / (lam - q1);
            assert!((a - b).re.abs() < 1e-15);
            assert!(((a - b).im - expect).abs() < 1e-10 * expect.abs());
        }
        assert!(matches!(
            phase_b(&m, 0, C64::new(-0.1, 0.0), (20.0, 0.0)),
            Err(Error::Spectral(_))
        ));
        let (b0, _) = phase_b(&m, 0, C64::new(1.0, 0.0), (1.0, 0.0)).unwrap();
        assert_eq!(b0, C64::new(0.0, 0.0));
    }

    #[test]
    fn riccati_residual_decreases_along_a_ladder() {
        let m = warped(WarpProfile::linear(1.0), Potential::Zero);
        for sign in [Sign::Plus, Sign::Minus] {
            let res: Vec<f64> = [25.0, 50.0, 100.0]
                .iter()
                .map(|&r| riccati_residual(&m, 0, C64::new(1.0, 0.0), sign, (r, 0.0)).unwrap())
                .collect();
            assert!(res[0] > res[1] && res[1] > res[2], "{res:?}");
            assert!(res[1] < 1e-5);
        }
    }

    #[test]
    fn phase_table_integrates_the_wavenumber() {
        let m = ManifoldModel::line(64.0, Potential::Zero);
        let g = LineGeometry::new(&m).unwrap();
        let (lo, hi) = g.x_range();
        let x: Vec<f64> = (0..=2000)
            .map(|i| lo + (hi - lo) * i as f64 / 2000.0)
            .collect();
        let t = PhaseTable::new(&g, &x, 0.5, 0.0).unwrap();
        assert_eq!(t.r_lambda, vec![8.0, 8.0]);
        let last = x.len() - 1;
        // beyond the cutoff the phase grows like x up to the O(r^-4)
        // curvature part of q1; the cutoff only shifts the constant
        let dphi = t.phi[last] - t.phi[last - 100];
        assert!((dphi - (x[last] - x[last - 100])).abs() < 1e-5);
        let dphi0 = t.phi[0] - t.phi[100];
        assert!((dphi0 - (x[100] - x[0])).abs() < 1e-5);
        assert_eq!(t.phi[1000], 0.0);
    }
}
