//! Per-mode resolvent solves on the line grid.
//!
//! Each mode is discretized by the symmetric scheme
//! `K u = M psi` with `K = S + M (W_m - z)`, where `S` is the stiffness
//! matrix of `1/2 |u'|^2` and `M` the lumped mass. Boundary nodes carry a
//! Robin closure `u'_out = beta u`: radiation closures for `R(lambda +/- i0)`,
//! decaying closures for complex `z`, and a wall at `r0` for single ends.
//! Because `K` is complex symmetric, `R(z)^T = R(z)` holds exactly on the grid.

mod besov;
mod diagnostics;
mod source;

pub use besov::{besov_norms, weighted, BesovNorms, ShellNorm};
pub use diagnostics::{
    decomposition_residual, greens_identity_check, phase_a_line, radial_momentum,
    radiation_residual, DecompositionReport, GreensCheck, RadiationResidual,
};
pub use source::SourceSpec;

use crate::geometry::{critical_energy, Coupling, LineGeometry, Sign};
use crate::linalg::{band_solve, BandMatrix};
use crate::modes::{Gauge, ModeBasis, ModeFunction};
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Uniform grid on the line coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub h: f64,
    /// Single ends carry a Dirichlet wall at `lo = r0`.
    pub dirichlet_lo: bool,
}

/// Grid along `r` for single-end models (`lo = r0`, `hi = Rmax`).
pub type RadialGrid = LineGrid;

impl LineGrid {
    /// Grid with spacing as close to `h` as an integer node count allows.
    pub fn new(geom: &LineGeometry, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        let (lo, hi) = geom.x_range();
        let n = ((hi - lo) / h).round() as usize + 1;
        Self::with_points(geom, n)
    }

    pub fn with_points(geom: &LineGeometry, n: usize) -> Result<Self> {
        if n < 5 {
            return Err(Error::Config("a line grid needs at least 5 nodes".into()));
        }
        let (lo, hi) = geom.x_range();
        Ok(LineGrid {
            lo,
            hi,
            n,
            h: (hi - lo) / (n - 1) as f64,
            dirichlet_lo: geom.model.coupling == Coupling::SingleEndDirichlet,
        })
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.hi
                } else {
                    self.lo + i as f64 * self.h
                }
            })
            .collect()
    }

    /// At least 20 nodes per shortest wavelength `2 pi / sqrt(2 (lambda - lambda0))`.
    pub fn check_resolution(&self, lambda: f64, lambda0: f64) -> Result<()> {
        if lambda <= lambda0 {
            return Ok(());
        }
        let wl = TAU / (2.0 * (lambda - lambda0)).sqrt();
        if self.h > wl / 20.0 {
            return Err(Error::Resolution(format!(
                "h = {} exceeds 1/20 of the wavelength {wl:.4} at lambda = {lambda}",
                self.h
            )));
        }
        Ok(())
    }

    /// Checks that a mode function lives on this grid.
    pub fn check(&self, f: &ModeFunction) -> Result<()> {
        let nodes = self.nodes();
        let tol = 1e-9 * self.h;
        if f.x.len() != nodes.len() || f.x.iter().zip(&nodes).any(|(a, b)| (a - b).abs() > tol) {
            return Err(Error::Shape(
                "function is not sampled on the solver grid".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    /// `R(lambda + i0)`.
    RadiationOutgoing,
    /// `R(lambda - i0)`.
    RadiationIncoming,
    /// Complex `z` with closures that decay outward.
    Damped,
}

impl BoundaryCondition {
    pub fn sign(self) -> Option<Sign> {
        match self {
            BoundaryCondition::RadiationOutgoing => Some(Sign::Plus),
            BoundaryCondition::RadiationIncoming => Some(Sign::Minus),
            BoundaryCondition::Damped => None,
        }
    }

    pub fn radiation(sign: Sign) -> Self {
        match sign {
            Sign::Plus => BoundaryCondition::RadiationOutgoing,
            Sign::Minus => BoundaryCondition::RadiationIncoming,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    Radiating,
    Evanescent,
    Damped,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClosureInfo {
    pub end: usize,
    pub x: f64,
    pub kind: ClosureKind,
    pub beta: C64,
    /// `Re z - W_m` at the closure node.
    pub detuning: f64,
}

#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub phi: ModeFunction,
    pub source: ModeFunction,
    pub z: C64,
    pub bc: BoundaryCondition,
    /// Relative residual `|K u - M psi| / |M psi|` per mode.
    pub residual: Vec<f64>,
    pub closures: Vec<Vec<ClosureInfo>>,
}

impl ResolventSolution {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }
}

/// Closure coefficient `beta` in the boundary row at a node with spacing `h`.
///
/// The outward step ratio `mu = u_{b+1} / u_b` of the three-point scheme with
/// frozen `W` solves `mu + 1/mu = 2 + 2 h^2 (W - z)`; the root is the
/// outgoing (incoming) wave on the unit circle, or the decaying one. With
/// `beta = (1 - 1/mu) / h + h (W - z)` the boundary row is satisfied exactly
/// by that wave, so the closure does not reflect at `O(h^2)`. A first-order
/// WKB term `W' / (2 k^2)` accounts for the slope of `W`.
fn closure(
    geom: &LineGeometry,
    nu: f64,
    xb: f64,
    inward: f64,
    h: f64,
    z: C64,
    bc: BoundaryCondition,
) -> Result<ClosureInfo> {
    let end = geom.end_of(xb);
    let w = |t: f64| geom.mode_potential(t, nu);
    let d = 1e-3 * xb.abs().max(1.0);
    let (w0, w1, w2) = (w(xb), w(xb + inward * d), w(xb + 2.0 * inward * d));
    let dw_out = -(-3.0 * w0 + 4.0 * w1 - w2) / (2.0 * d);
    let det = z.re - w0;
    let c = C64::new(1.0, 0.0) + (C64::new(w0, 0.0) - z) * (h * h);
    let root = (c * c - 1.0).sqrt();
    let (mu_a, mu_b) = (c + root, c - root);
    let (kind, mu) = match bc {
        BoundaryCondition::RadiationOutgoing | BoundaryCondition::RadiationIncoming => {
            if z.im != 0.0 {
                return Err(Error::Config(
                    "radiation closures need a real energy".into(),
                ));
            }
            if det.abs() < 1e-6 {
                return Err(Error::Closure(format!(
                    "energy {} within 1e-6 of the mode threshold {w0} at the outer boundary of end {end}; increase Rmax",
                    z.re
                )));
            }
            if det > 0.0 {
                if h * h * det >= 2.0 {
                    return Err(Error::Resolution(format!(
                        "spacing {h} cannot carry the wave of energy {det} above threshold at the boundary of end {end}"
                    )));
                }
                let s = bc.sign().unwrap().value();
                // both roots lie on the unit circle; pick Im mu with the sign of s
                let mu = if mu_a.im * s > 0.0 { mu_a } else { mu_b };
                (ClosureKind::Radiating, mu)
            } else {
                let mu = if mu_a.norm() < 1.0 { mu_a } else { mu_b };
                (ClosureKind::Evanescent, mu)
            }
        }
        BoundaryCondition::Damped => {
            if z.im == 0.0 {
                return Err(Error::Config("damped closures need Im z != 0".into()));
            }
            let mu = if mu_a.norm() < mu_b.norm() {
                mu_a
            } else {
                mu_b
            };
            (ClosureKind::Damped, mu)
        }
    };
    let k2 = (z - w0) * 2.0;
    let beta =
        (C64::new(1.0, 0.0) - mu.inv()) / h + (C64::new(w0, 0.0) - z) * h + dw_out / (k2 * 2.0);
    Ok(ClosureInfo {
        end,
        x: xb,
        kind,
        beta,
        detuning: det,
    })
}

/// Assembled system of one mode: unknowns are the nodes from `first` on.
pub struct ModeSystem {
    pub matrix: BandMatrix,
    pub mass: Vec<f64>,
    pub first: usize,
    pub closures: Vec<ClosureInfo>,
}

pub fn mode_system(
    geom: &LineGeometry,
    grid: &LineGrid,
    nu: f64,
    z: C64,
    bc: BoundaryCondition,
) -> Result<ModeSystem> {
    let x = grid.nodes();
    let h = grid.h;
    let first = usize::from(grid.dirichlet_lo);
    let n = grid.n - first;
    let mut k = BandMatrix::zeros(n, 1, 1);
    let mut mass = vec![h; n];
    let mut closures = vec![];
    let off = C64::new(-0.5 / h, 0.0);
    for j in 0..n {
        let i = j + first;
        let wz = C64::new(geom.mode_potential(x[i], nu), 0.0) - z;
        let is_lo = i == 0;
        let is_hi = i + 1 == grid.n;
        if is_lo || is_hi {
            let c = closure(geom, nu, x[i], if is_lo { 1.0 } else { -1.0 }, h, z, bc)?;
            k.set(j, j, C64::new(0.5 / h, 0.0) - c.beta * 0.5 + wz * (0.5 * h));
            mass[j] = 0.5 * h;
            closures.push(c);
        } else {
            k.set(j, j, C64::new(1.0 / h, 0.0) + wz * h);
        }
        if j > 0 {
            k.set(j, j - 1, off);
        }
        if j + 1 < n {
            k.set(j, j + 1, off);
        }
    }
    Ok(ModeSystem {
        matrix: k,
        mass,
        first,
        closures,
    })
}

/// Solves one mode; `rhs` is the source on all grid nodes.
pub fn solve_mode(
    geom: &LineGeometry,
    grid: &LineGrid,
    nu: f64,
    rhs: &[C64],
    z: C64,
    bc: BoundaryCondition,
) -> Result<(Vec<C64>, f64, Vec<ClosureInfo>)> {
    let sys = mode_system(geom, grid, nu, z, bc)?;
    let b: Vec<C64> = sys
        .mass
        .iter()
        .enumerate()
        .map(|(j, m)| rhs[j + sys.first] * *m)
        .collect();
    let sol = band_solve(&sys.matrix, &b).map_err(|e| match e {
        Error::Singular(m) => Error::Singular(format!(
            "z = {z} collides with an eigenvalue of the truncated problem ({m})"
        )),
        other => other,
    })?;
    let kx = sys.matrix.matvec(&sol);
    let num: f64 = kx
        .iter()
        .zip(&b)
        .map(|(a, c)| (a - c).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let res = if den > 0.0 { num / den } else { num };
    let mut u = vec![C64::new(0.0, 0.0); grid.n];
    u[sys.first..].copy_from_slice(&sol);
    Ok((u, res, sys.closures))
}

/// Solves `(H - z) phi = psi` mode by mode.
pub fn solve_resolvent(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    psi: &ModeFunction,
    z: C64,
    bc: BoundaryCondition,
) -> Result<ResolventSolution> {
    if !geom.model.potential.is_separable() {
        return Err(Error::NonSeparable(
            "the potential depends on the angle; modes do not decouple".into(),
        ));
    }
    grid.check(psi)?;
    if psi.labels != basis.labels() {
        return Err(Error::Shape("source modes differ from the basis".into()));
    }
    let psi = psi.to_gauge(geom, Gauge::HalfDensity);
    if z.im == 0.0 || bc != BoundaryCondition::Damped {
        let ce = critical_energy(&geom.model)?;
        if bc != BoundaryCondition::Damped && z.re <= ce.lambda0 {
            return Err(Error::Spectral(format!(
                "radiation closures need lambda > lambda0 = {}",
                ce.lambda0
            )));
        }
        grid.check_resolution(z.re, ce.lambda0)?;
    }
    let mut phi = ModeFunction {
        u: vec![],
        ..psi.clone()
    };
    let mut residual = vec![];
    let mut closures = vec![];
    for (j, rhs) in psi.u.iter().enumerate() {
        if rhs.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            phi.u.push(vec![C64::new(0.0, 0.0); grid.n]);
            residual.push(0.0);
            closures.push(vec![]);
            continue;
        }
        let (u, res, cl) = solve_mode(geom, grid, basis.nu(j), rhs, z, bc)?;
        phi.u.push(u);
        residual.push(res);
        closures.push(cl);
    }
    Ok(ResolventSolution {
        phi,
        source: psi,
        z,
        bc,
        residual,
        closures,
    })
}

/// Damped solves at `lambda + i eps` and their order-one extrapolation.
#[derive(Clone, Debug)]
pub struct EpsLadder {
    pub eps: Vec<f64>,
    pub solutions: Vec<ResolventSolution>,
    /// Linear extrapolation to `eps = 0` from the last two rungs.
    pub extrapolated: ModeFunction,
    /// `|phi(eps_last) - phi(eps_prev)|_{B*}`.
    pub last_increment: f64,
}

pub fn eps_ladder(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    psi: &ModeFunction,
    lambda: f64,
    eps: &[f64],
) -> Result<EpsLadder> {
    if eps.len() < 2 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Config(
            "an eps ladder needs at least two positive rungs".into(),
        ));
    }
    let sols = eps
        .iter()
        .map(|e| {
            solve_resolvent(
                geom,
                basis,
                grid,
                psi,
                C64::new(lambda, *e),
                BoundaryCondition::Damped,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let n = sols.len();
    let (ea, eb) = (eps[n - 2], eps[n - 1]);
    let (pa, pb) = (&sols[n - 2].phi, &sols[n - 1].phi);
    // value at 0 of the line through (ea, pa) and (eb, pb)
    let extrapolated = pb
        .scale(C64::new(ea / (ea - eb), 0.0))
        .axpy(C64::new(-eb / (ea - eb), 0.0), pa)?;
    let inc = besov_norms(&pb.axpy(C64::new(-1.0, 0.0), pa)?, geom)?.b_star;
    Ok(EpsLadder {
        eps: eps.to_vec(),
        solutions: sols,
        extrapolated,
        last_increment: inc,
    })
}
