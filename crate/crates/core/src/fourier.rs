//! Distorted Fourier transforms at a fixed energy.
//!
//! Mode profiles are stripped of their WKB amplitude and phase,
//! `xi_m(r) = sqrt(k) exp(-/+ i Phi) u_m` in half-density gauge, and averaged
//! over dyadic windows `[R, 2R]` in `r`. The last complete window gives the
//! transform; its distance to the previous window is the Cauchy diagnostic.

use crate::geometry::{critical_energy, r_lambda, LineGeometry, PhaseTable, Sign};
use crate::modes::{BoundaryData, Gauge, ModeBasis, ModeFunction};
use crate::numerics::{chi_bar, window_average};
use crate::solver::{
    besov_norms, radial_momentum, solve_resolvent, BoundaryCondition, LineGrid, ResolventSolution,
};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Window-to-window tolerance relative to `|xi|_G`.
pub const CAUCHY_TOL: f64 = 1e-2;
/// Largest accepted `|(H - lambda) phi|` relative to `max(lambda, 1) max |phi|`
/// on the averaging region.
pub const EIGEN_TOL: f64 = 5e-2;

const ZERO: C64 = C64::new(0.0, 0.0);

/// How the phase `Phi` is accumulated along the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRule {
    /// `Phi = int k dx`.
    Continuum,
    /// Cell increments `2 asin(dPhi / 2)`, the phase of the discrete plane
    /// wave of the three-point scheme.
    GridMatched,
}

/// Node indices of one end ordered outward (assumes increasing `x`).
fn outward_nodes(end: &[usize], e: usize, outward: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..end.len()).filter(|&i| end[i] == e).collect();
    if outward < 0.0 {
        idx.reverse();
    }
    idx
}

fn phases(
    geom: &LineGeometry,
    x: &[f64],
    lambda: f64,
    rule: PhaseRule,
) -> Result<(PhaseTable, Vec<f64>)> {
    let ce = critical_energy(&geom.model)?;
    let t = PhaseTable::new(geom, x, lambda, ce.lambda0)?;
    let phase = match rule {
        PhaseRule::Continuum => t.phi.clone(),
        PhaseRule::GridMatched => {
            let mut p = t.phi.clone();
            for e in 0..geom.n_ends() {
                let idx = outward_nodes(&t.end, e, geom.outward(e));
                for w in idx.windows(2) {
                    let half = 0.5 * (t.phi[w[1]] - t.phi[w[0]]);
                    if half.abs() >= 1.0 {
                        return Err(Error::Resolution(format!(
                            "phase step {} per cell at x = {} exceeds the grid Nyquist limit",
                            2.0 * half,
                            x[w[1]]
                        )));
                    }
                    p[w[1]] = p[w[0]] + 2.0 * half.asin();
                }
            }
            p
        }
    };
    Ok((t, phase))
}

/// Transported profile of one end on the nodes where `b > 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndTrace {
    pub end: usize,
    /// Increasing radii.
    pub r: Vec<f64>,
    pub x: Vec<f64>,
    /// `xi[mode][node]`.
    pub xi: Vec<Vec<C64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct XiTrace {
    pub lambda: f64,
    pub sign: Sign,
    pub rule: PhaseRule,
    pub labels: Vec<i64>,
    pub r_lambda: Vec<f64>,
    pub ends: Vec<EndTrace>,
}

impl XiTrace {
    /// Values of all modes at the node of `end` nearest to `r`.
    pub fn nearest(&self, end: usize, r: f64) -> Option<(f64, Vec<C64>)> {
        let t = self.ends.get(end)?;
        let i =
            (0..t.r.len()).min_by(|&a, &b| (t.r[a] - r).abs().total_cmp(&(t.r[b] - r).abs()))?;
        Some((t.r[i], t.xi.iter().map(|v| v[i]).collect()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["end", "mode", "r", "re", "im"])?;
        for t in &self.ends {
            for (m, label) in self.labels.iter().enumerate() {
                for (r, v) in t.r.iter().zip(&t.xi[m]) {
                    out.write_record(&[
                        t.end.to_string(),
                        label.to_string(),
                        format!("{r:.17e}"),
                        format!("{:.17e}", v.re),
                        format!("{:.17e}", v.im),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

fn check_solution(sol: &ResolventSolution, lambda: f64, sign: Sign) -> Result<()> {
    if !sol.bc.matches(sign) {
        return Err(Error::Refused(format!(
            "the {sign:?} transform needs the matching radiation closure, the solution carries {:?}",
            sol.bc
        )));
    }
    if sol.z.im != 0.0 || (sol.z.re - lambda).abs() > 1e-12 * lambda.abs().max(1.0) {
        return Err(Error::Config(format!(
            "solution energy {} differs from lambda = {lambda}",
            sol.z
        )));
    }
    Ok(())
}

/// `xi(r)` of a radiation solution with the continuum phase.
pub fn xi_trace(
    geom: &LineGeometry,
    sol: &ResolventSolution,
    lambda: f64,
    sign: Sign,
) -> Result<XiTrace> {
    check_solution(sol, lambda, sign)?;
    trace_function(geom, &sol.phi, lambda, sign, PhaseRule::Continuum)
}

/// `xi_m(r) = sqrt(k) exp(-/+ i Phi) u_m` of any mode function.
pub fn trace_function(
    geom: &LineGeometry,
    f: &ModeFunction,
    lambda: f64,
    sign: Sign,
    rule: PhaseRule,
) -> Result<XiTrace> {
    let f = f.to_gauge(geom, Gauge::HalfDensity);
    let (t, phase) = phases(geom, &f.x, lambda, rule)?;
    let s = sign.value();
    let ends = (0..geom.n_ends())
        .map(|e| {
            let idx: Vec<usize> = outward_nodes(&t.end, e, geom.outward(e))
                .into_iter()
                .filter(|&i| t.k[i] > 0.0)
                .collect();
            EndTrace {
                end: e,
                r: idx.iter().map(|&i| f.r[i]).collect(),
                x: idx.iter().map(|&i| f.x[i]).collect(),
                xi: f
                    .u
                    .iter()
                    .map(|um| {
                        idx.iter()
                            .map(|&i| um[i] * C64::from_polar(t.k[i].sqrt(), -s * phase[i]))
                            .collect()
                    })
                    .collect(),
            }
        })
        .collect();
    Ok(XiTrace {
        lambda,
        sign,
        rule,
        labels: f.labels.clone(),
        r_lambda: t.r_lambda.clone(),
        ends,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowAverage {
    pub end: usize,
    pub r_lo: f64,
    pub r_hi: f64,
    /// Per mode.
    pub values: Vec<C64>,
}

/// Averages over all windows `[2^j, 2^{j+1}]` with `2^j >= r_lambda` inside
/// the sampled range.
pub fn window_averages(trace: &XiTrace) -> Vec<WindowAverage> {
    let mut out = vec![];
    for t in &trace.ends {
        let (Some(first), Some(last)) = (t.r.first(), t.r.last()) else {
            continue;
        };
        let start = trace.r_lambda[t.end].max(*first);
        let mut big_r = 2f64.powi(start.log2().ceil() as i32);
        while 2.0 * big_r <= last * (1.0 + 1e-12) {
            let hi = (2.0 * big_r).min(*last);
            let values =
                t.xi.iter()
                    .map(|v| window_average(&t.r, v, big_r, hi).unwrap_or(ZERO))
                    .collect();
            out.push(WindowAverage {
                end: t.end,
                r_lo: big_r,
                r_hi: hi,
                values,
            });
            big_r *= 2.0;
        }
    }
    out
}

fn interpolate(r: &[f64], v: &[C64], t: f64) -> C64 {
    match r.binary_search_by(|p| p.total_cmp(&t)) {
        Ok(i) => v[i],
        Err(0) => v[0],
        Err(i) if i >= r.len() => v[r.len() - 1],
        Err(i) => {
            let s = (t - r[i - 1]) / (r[i] - r[i - 1]);
            v[i - 1] * (1.0 - s) + v[i] * s
        }
    }
}

/// Averaged large-`r` limit of a trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowedLimit {
    /// Average over the last window of each end.
    pub xi: BoundaryData,
    /// Pointwise values at `r = 1.5 R` of the last window.
    pub pointwise: BoundaryData,
    pub windows: Vec<WindowAverage>,
    /// `|xi_last - xi_previous|_G` over all ends.
    pub cauchy: f64,
    pub converged: bool,
}

pub fn windowed_limit(trace: &XiTrace, tol: f64) -> Result<WindowedLimit> {
    let windows = window_averages(trace);
    let n_ends = trace.ends.len();
    let mut xi = BoundaryData::zeros(trace.lambda, n_ends, &trace.labels);
    let mut pointwise = xi.clone();
    let mut cauchy_sq = 0.0;
    let mut enough = true;
    for (e, t) in trace.ends.iter().enumerate() {
        let own: Vec<&WindowAverage> = windows.iter().filter(|w| w.end == e).collect();
        let Some(last) = own.last() else {
            return Err(Error::Resolution(format!(
                "end {e}: no window [R, 2R] with R >= r_lambda = {} fits below Rmax",
                trace.r_lambda[e]
            )));
        };
        xi.coeffs[e] = last.values.clone();
        let r_mid = 1.5 * last.r_lo;
        pointwise.coeffs[e] = t.xi.iter().map(|v| interpolate(&t.r, v, r_mid)).collect();
        if own.len() < 2 {
            enough = false;
            continue;
        }
        let prev = own[own.len() - 2];
        cauchy_sq += last
            .values
            .iter()
            .zip(&prev.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
    }
    let cauchy = if enough {
        cauchy_sq.sqrt()
    } else {
        f64::INFINITY
    };
    let converged = cauchy <= tol * xi.norm();
    Ok(WindowedLimit {
        xi,
        pointwise,
        windows,
        cauchy,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DFTResult {
    pub lambda: f64,
    pub sign: Sign,
    pub xi: BoundaryData,
    pub pointwise: BoundaryData,
    pub windows: Vec<WindowAverage>,
    pub cauchy: f64,
    pub converged: bool,
    /// `|xi|_G^2`.
    pub norm_sq: f64,
    /// `2 Im <psi, R(lambda + i0) psi>`, or `-2 Im <psi, R(lambda - i0) psi>`
    /// for the incoming transform.
    pub flux: f64,
    pub parseval_gap: f64,
    /// `|psi|_B`.
    pub source_b: f64,
    /// Reference radii fixing the phase convention of `xi`.
    pub r0: Vec<f64>,
}

/// `F+/-(lambda) psi` through a radiation solve.
pub fn dft(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    lambda: f64,
    sign: Sign,
    psi: &ModeFunction,
) -> Result<DFTResult> {
    let sol = solve_resolvent(
        geom,
        basis,
        grid,
        psi,
        C64::new(lambda, 0.0),
        BoundaryCondition::radiation(sign),
    )?;
    transform_solution(geom, &sol, lambda, sign)
}

/// Transform of an existing radiation solution, with the grid-matched phase.
pub fn transform_solution(
    geom: &LineGeometry,
    sol: &ResolventSolution,
    lambda: f64,
    sign: Sign,
) -> Result<DFTResult> {
    check_solution(sol, lambda, sign)?;
    let trace = trace_function(geom, &sol.phi, lambda, sign, PhaseRule::GridMatched)?;
    let lim = windowed_limit(&trace, CAUCHY_TOL)?;
    let flux = sign.value() * 2.0 * sol.source.inner(&sol.phi)?.im;
    let norm_sq = lim.xi.norm_sq();
    Ok(DFTResult {
        lambda,
        sign,
        pointwise: lim.pointwise,
        windows: lim.windows,
        cauchy: lim.cauchy,
        converged: lim.converged,
        norm_sq,
        flux,
        parseval_gap: (norm_sq - flux).abs(),
        source_b: besov_norms(&sol.source, geom)?.b,
        r0: (0..geom.n_ends()).map(|e| geom.r0(e)).collect(),
        xi: lim.xi,
    })
}

/// Smallest `n` with `2^n >= r_lambda / 2` on every end: the outer cutoff
/// `chi_bar(r / 2^n)` then vanishes wherever `b` may.
pub fn default_cutoff_index(geom: &LineGeometry, lambda: f64) -> Result<i32> {
    let ce = critical_energy(&geom.model)?;
    let rl = r_lambda(&geom.model, lambda, ce.lambda0)?;
    let m = rl.iter().cloned().fold(0.0, f64::max);
    Ok((0.5 * m).log2().ceil() as i32)
}

fn check_data(xi: &BoundaryData, labels: &[i64], n_ends: usize) -> Result<()> {
    if xi.labels != labels
        || xi.coeffs.len() != n_ends
        || xi.coeffs.iter().any(|c| c.len() != labels.len())
    {
        return Err(Error::Shape(
            "boundary data do not match the mode basis".into(),
        ));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn wkb_profile(
    geom: &LineGeometry,
    labels: &[i64],
    x: &[f64],
    lambda: f64,
    sign: Sign,
    xi: &BoundaryData,
    cut: f64,
    rule: PhaseRule,
) -> Result<ModeFunction> {
    check_data(xi, labels, geom.n_ends())?;
    let (t, phase) = phases(geom, x, lambda, rule)?;
    let mut f = ModeFunction::zeros(geom, x, labels, Gauge::HalfDensity);
    for i in 0..x.len() {
        let c = chi_bar(f.r[i], cut);
        if c == 0.0 {
            continue;
        }
        let d = lambda - t.q1[i];
        if d <= 0.0 {
            return Err(Error::Branch(format!(
                "lambda - q1 = {d} <= 0 at r = {} inside the cutoff support",
                f.r[i]
            )));
        }
        let amp = c * t.eta_lambda[i] * (2.0 * d).powf(-0.25);
        if amp == 0.0 {
            continue;
        }
        let w = C64::from_polar(amp, sign.value() * phase[i]);
        for (m, um) in f.u.iter_mut().enumerate() {
            um[i] = w * xi.coeffs[t.end[i]][m];
        }
    }
    Ok(f)
}

/// `chi_bar(r / 2^n) [2 (lambda - q1)]^{-1/4} exp(+/- i Phi) xi` per mode,
/// with the continuum phase, in half-density gauge.
pub fn wkb_eigenfunction(
    geom: &LineGeometry,
    basis: &ModeBasis,
    x: &[f64],
    lambda: f64,
    sign: Sign,
    xi: &BoundaryData,
    n: i32,
) -> Result<ModeFunction> {
    wkb_profile(
        geom,
        &basis.labels(),
        x,
        lambda,
        sign,
        xi,
        2f64.powi(n),
        PhaseRule::Continuum,
    )
}

/// `(H_h - lambda) f` with the three-point stencil. Boundary nodes use a
/// ghost value continuing `f` geometrically; a Dirichlet node gives zero.
fn shifted_apply(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    f: &ModeFunction,
    lambda: f64,
) -> ModeFunction {
    let n = f.len();
    let h = grid.h;
    let mut out = f.clone();
    for (m, um) in f.u.iter().enumerate() {
        let nu = basis.nu(m);
        let o = &mut out.u[m];
        if um.iter().all(|v| *v == ZERO) {
            continue;
        }
        let ghost = |b: C64, inner: C64| if inner == ZERO { ZERO } else { b * b / inner };
        for i in 0..n {
            let (lo, hi) = if i == 0 {
                (ghost(um[0], um[1]), um[1])
            } else if i + 1 == n {
                (um[n - 2], ghost(um[n - 1], um[n - 2]))
            } else {
                (um[i - 1], um[i + 1])
            };
            o[i] = (hi - um[i] * 2.0 + lo) * (-0.5 / (h * h))
                + um[i] * (geom.mode_potential(f.x[i], nu) - lambda);
        }
        if grid.dirichlet_lo {
            o[0] = ZERO;
        }
    }
    out
}

/// `max |(H_h - lambda) f|` over interior nodes with `r >= r_min`, relative
/// to `max(lambda, 1) max |f|` there.
fn eigen_residual(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    f: &ModeFunction,
    lambda: f64,
    r_min: f64,
) -> f64 {
    let g = shifted_apply(geom, basis, grid, f, lambda);
    let n = f.len();
    let inside = |i: usize| i > 0 && i + 1 < n && f.r[i] >= r_min;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (um, gm) in f.u.iter().zip(&g.u) {
        for i in (0..n).filter(|&i| inside(i)) {
            num = num.max(gm[i].norm());
            den = den.max(um[i].norm());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        num / (den * lambda.max(1.0))
    }
}

#[derive(Clone, Debug)]
pub struct GeneralizedEigenfunction {
    pub lambda: f64,
    pub phi: ModeFunction,
    pub xi_minus: BoundaryData,
    /// `(lambda - i) F+(lambda) psi_-`.
    pub xi_plus: BoundaryData,
    /// Window diagnostics of the inner transform.
    pub inner: WindowedLimit,
    pub converged: bool,
    /// Relative `|(H_h - lambda) phi|` on interior nodes.
    pub eigen_residual: f64,
    pub cutoff_radius: f64,
}

/// `phi = psi_- + (lambda - i) R(lambda + i0) psi_- - phi_-[xi_-]` with
/// `psi_- = R(i) (H - lambda) phi_-[xi_-]`. The incoming WKB profile uses the
/// grid-matched phase so that its discrete residual decays like the
/// continuum one.
pub fn generalized_eigenfunction(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    lambda: f64,
    xi_minus: &BoundaryData,
) -> Result<GeneralizedEigenfunction> {
    let labels = basis.labels();
    check_data(xi_minus, &labels, geom.n_ends())?;
    let x = grid.nodes();
    for (e, c) in xi_minus.coeffs.iter().enumerate() {
        let xb = if geom.outward(e) > 0.0 {
            x[x.len() - 1]
        } else {
            x[0]
        };
        for (m, v) in c.iter().enumerate() {
            if *v != ZERO && geom.mode_potential(xb, basis.nu(m)) >= lambda {
                return Err(Error::Spectral(format!(
                    "mode {} does not propagate at the outer boundary of end {e}",
                    labels[m]
                )));
            }
        }
    }
    let cut = 2f64.powi(default_cutoff_index(geom, lambda)?);
    let phi_in = wkb_profile(
        geom,
        &labels,
        &x,
        lambda,
        Sign::Minus,
        xi_minus,
        cut,
        PhaseRule::GridMatched,
    )?;
    let g = shifted_apply(geom, basis, grid, &phi_in, lambda);
    let psi = solve_resolvent(
        geom,
        basis,
        grid,
        &g,
        C64::new(0.0, 1.0),
        BoundaryCondition::Damped,
    )?;
    let w = solve_resolvent(
        geom,
        basis,
        grid,
        &psi.phi,
        C64::new(lambda, 0.0),
        BoundaryCondition::RadiationOutgoing,
    )?;
    let shift = C64::new(lambda, -1.0);
    let phi = psi
        .phi
        .axpy(shift, &w.phi)?
        .axpy(C64::new(-1.0, 0.0), &phi_in)?;
    let trace = trace_function(geom, &w.phi, lambda, Sign::Plus, PhaseRule::GridMatched)?;
    let inner = windowed_limit(&trace, CAUCHY_TOL)?;
    let mut xi_plus = inner.xi.clone();
    for c in xi_plus.coeffs.iter_mut().flatten() {
        *c *= shift;
    }
    let eigen_residual = eigen_residual(geom, basis, grid, &phi, lambda, 0.0);
    Ok(GeneralizedEigenfunction {
        lambda,
        converged: inner.converged,
        phi,
        xi_minus: xi_minus.clone(),
        xi_plus,
        inner,
        eigen_residual,
        cutoff_radius: cut,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Asymptotics {
    pub lambda: f64,
    pub xi_minus: BoundaryData,
    pub xi_plus: BoundaryData,
    pub cauchy_minus: f64,
    pub cauchy_plus: f64,
    pub converged: bool,
    /// `R^{-1} int_{R <= r <= 2R} b |phi|^2` over the last windows.
    pub shell_energy: f64,
    /// `| |xi+| - |xi-| | / max(|xi+|, |xi-|)`.
    pub norm_defect: f64,
    /// Relative gap between `|xi+|^2 + |xi-|^2` and the shell energy.
    pub energy_defect: f64,
    pub eigen_residual: f64,
}

/// `xi+/- = 1/2` averaged limit of `k^{-1/2} exp(-/+ i Phi) (A/|r'| +/- k) u`.
pub fn extract_asymptotics(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    lambda: f64,
    phi: &ModeFunction,
    rule: PhaseRule,
) -> Result<Asymptotics> {
    grid.check(phi)?;
    if phi.labels != basis.labels() {
        return Err(Error::Shape("mode labels differ from the basis".into()));
    }
    let phi = phi.to_gauge(geom, Gauge::HalfDensity);
    let x = &phi.x;
    let (t, _) = phases(geom, x, lambda, rule)?;
    let au = phi
        .u
        .iter()
        .map(|um| radial_momentum(geom, x, um))
        .collect::<Result<Vec<_>>>()?;
    // the traces multiply by sqrt(k), so the halves are divided by k here
    let mut parts = [phi.clone(), phi.clone()];
    for (m, um) in phi.u.iter().enumerate() {
        for i in 0..x.len() {
            let k = t.k[i];
            let (p, q) = if k > 0.0 {
                let a = au[m][i] / geom.r(x[i]).r1.abs();
                ((a + um[i] * k) / (2.0 * k), (a - um[i] * k) / (2.0 * k))
            } else {
                (ZERO, ZERO)
            };
            parts[0].u[m][i] = p;
            parts[1].u[m][i] = q;
        }
    }
    let plus = trace_function(geom, &parts[0], lambda, Sign::Plus, rule)?;
    let minus = trace_function(geom, &parts[1], lambda, Sign::Minus, rule)?;
    let lp = windowed_limit(&plus, CAUCHY_TOL)?;
    let lm = windowed_limit(&minus, CAUCHY_TOL)?;
    // residual over the last two windows of each end
    let r_min = (0..geom.n_ends())
        .filter_map(|e| {
            let own: Vec<f64> = lp
                .windows
                .iter()
                .filter(|w| w.end == e)
                .map(|w| w.r_lo)
                .collect();
            own.len()
                .checked_sub(2)
                .map_or(own.first().copied(), |j| Some(own[j]))
        })
        .fold(f64::INFINITY, f64::min);
    let eigen = eigen_residual(geom, basis, grid, &phi, lambda, r_min);
    if eigen > EIGEN_TOL {
        return Err(Error::Refused(format!(
            "relative eigen-residual {eigen:.3e} above {EIGEN_TOL:.0e}: not an approximate eigenfunction"
        )));
    }
    // shell energy over the last window of each end
    let mut shell_energy = 0.0;
    for e in 0..geom.n_ends() {
        let Some(w) = lp.windows.iter().rfind(|w| w.end == e) else {
            continue;
        };
        let idx: Vec<usize> = outward_nodes(&t.end, e, geom.outward(e))
            .into_iter()
            .filter(|&i| t.k[i] > 0.0)
            .collect();
        let r: Vec<f64> = idx.iter().map(|&i| phi.r[i]).collect();
        let dens: Vec<C64> = idx
            .iter()
            .map(|&i| {
                C64::new(
                    t.k[i] * phi.u.iter().map(|um| um[i].norm_sqr()).sum::<f64>(),
                    0.0,
                )
            })
            .collect();
        shell_energy += window_average(&r, &dens, w.r_lo, w.r_hi).map_or(0.0, |v| v.re);
    }
    let (np, nm) = (lp.xi.norm(), lm.xi.norm());
    let top = np.max(nm);
    let norm_defect = if top > 0.0 {
        (np - nm).abs() / top
    } else {
        0.0
    };
    let total = np * np + nm * nm;
    let energy_defect = if total.max(shell_energy) > 0.0 {
        (total - shell_energy).abs() / total.max(shell_energy)
    } else {
        0.0
    };
    Ok(Asymptotics {
        lambda,
        converged: lp.converged && lm.converged,
        cauchy_plus: lp.cauchy,
        cauchy_minus: lm.cauchy,
        xi_plus: lp.xi,
        xi_minus: lm.xi,
        shell_energy,
        norm_defect,
        energy_defect,
        eigen_residual: eigen,
    })
}
