//! Dyadic-shell norms `|psi|_B = sum R_nu^{1/2} |F_nu psi|` and
//! `|psi|_{B*} = sup R_nu^{-1/2} |F_nu psi|`, shells `r in [2^nu, 2^{nu+1})`.

use crate::geometry::LineGeometry;
use crate::modes::{cell_weights, Gauge, ModeFunction};
use crate::{Error, Result, C64};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellNorm {
    pub nu: i32,
    pub r_lo: f64,
    pub r_hi: f64,
    /// `|F_nu psi|`.
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BesovNorms {
    pub b: f64,
    pub b_star: f64,
    pub shells: Vec<ShellNorm>,
}

impl BesovNorms {
    /// Partial sums of the `B` series, innermost shell first.
    pub fn partial_b(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.shells
            .iter()
            .map(|s| {
                acc += 2f64.powi(s.nu).sqrt() * s.norm;
                acc
            })
            .collect()
    }
}

fn shell_of(r: f64) -> i32 {
    if r < 1.0 {
        0
    } else {
        r.log2().floor() as i32
    }
}

/// Line coordinates where `r` crosses a power of two inside `[lo, hi]`.
fn breakpoints(geom: &LineGeometry, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![];
    for e in 0..geom.n_ends() {
        let rmax = geom.r_max(e);
        let mut j = 0;
        while 2f64.powi(j) <= rmax * 2.0 {
            let x = geom.x_of_r(e, 2f64.powi(j));
            if x > lo && x < hi && (geom.r(x).r - 2f64.powi(j)).abs() < 1e-9 * 2f64.powi(j) {
                out.push(x);
            }
            j += 1;
        }
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}

/// Shell masses `|F_nu psi|^2` with node cells split over shells by overlap.
fn shell_masses(f: &ModeFunction, geom: &LineGeometry) -> Vec<(i32, f64)> {
    let x = &f.x;
    let n = x.len();
    let w = cell_weights(x);
    let half: Vec<f64> = match f.gauge {
        Gauge::HalfDensity => vec![1.0; n],
        Gauge::Geometric => x
            .iter()
            .map(|t| if geom.d == 1 { 1.0 } else { geom.warp(*t).f() })
            .collect(),
    };
    let node_mass: Vec<f64> = (0..n)
        .map(|i| f.u.iter().map(|um| um[i].norm_sqr()).sum::<f64>() * half[i])
        .collect();
    let bps = breakpoints(geom, x[0], x[n - 1]);
    let mut masses: Vec<(i32, f64)> = vec![];
    let mut add = |nu: i32, m: f64| {
        if let Some(e) = masses.iter_mut().find(|e| e.0 == nu) {
            e.1 += m;
        } else {
            masses.push((nu, m));
        }
    };
    for i in 0..n {
        let a = if i == 0 {
            x[0]
        } else {
            0.5 * (x[i - 1] + x[i])
        };
        let b = if i + 1 == n {
            x[n - 1]
        } else {
            0.5 * (x[i] + x[i + 1])
        };
        let len = b - a;
        if len <= 0.0 || w[i] <= 0.0 {
            continue;
        }
        let mut cuts = vec![a];
        cuts.extend(bps.iter().filter(|p| **p > a && **p < b));
        cuts.push(b);
        for s in cuts.windows(2) {
            let mid = 0.5 * (s[0] + s[1]);
            add(shell_of(geom.r(mid).r), node_mass[i] * (s[1] - s[0]));
        }
    }
    masses.sort_by_key(|m| m.0);
    masses
}

pub fn besov_norms(f: &ModeFunction, geom: &LineGeometry) -> Result<BesovNorms> {
    if f.len() < 2 {
        return Err(Error::Shape("need at least two nodes".into()));
    }
    let masses = shell_masses(f, geom);
    let r_lo = f.r.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_hi = f.r.iter().cloned().fold(0.0, f64::max);
    let n_shells = shell_of(r_hi * (1.0 - 1e-12)) - shell_of(r_lo) + 1;
    if n_shells < 2 {
        return Err(Error::Shape(format!(
            "grid spans r in [{r_lo}, {r_hi}]: fewer than two dyadic shells"
        )));
    }
    let shells: Vec<ShellNorm> = masses
        .into_iter()
        .map(|(nu, m)| ShellNorm {
            nu,
            r_lo: 2f64.powi(nu),
            r_hi: 2f64.powi(nu + 1),
            norm: m.sqrt(),
        })
        .collect();
    let b = shells.iter().map(|s| 2f64.powi(s.nu).sqrt() * s.norm).sum();
    let b_star = shells
        .iter()
        .map(|s| s.norm / 2f64.powi(s.nu).sqrt())
        .fold(0.0, f64::max);
    Ok(BesovNorms { b, b_star, shells })
}

/// `r^beta f`.
pub fn weighted(f: &ModeFunction, beta: f64) -> ModeFunction {
    let mut out = f.clone();
    for um in &mut out.u {
        for (v, r) in um.iter_mut().zip(&f.r) {
            *v *= C64::new(r.powf(beta), 0.0);
        }
    }
    out
}
