//! Angular eigenbases and the per-mode representation of wavefunctions.
//!
//! Mode profiles are stored on the line grid of [`LineGeometry`]. In the
//! half-density gauge `u_m(x) = F(x)^{1/2} <e^_m, phi(x, .)>` where `e^_m` is
//! orthonormal in `L^2(dtheta)`; the squared norm is then `sum_m int |u_m|^2 dx`.
//! The vectors `e_m = s^{-1/2} e^_m` stored in the basis are orthonormal for the
//! induced measure `s dtheta` on the reference sphere, so coefficients in
//! [`BoundaryData`] are plain `l^2` coordinates of the limiting space.

use crate::geometry::{AngularSpace, ChartKind, LineGeometry, ManifoldModel};
use crate::linalg::symmetric_tridiagonal_eigen;
use crate::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};

pub const CIRCLE_POINTS: usize = 64;
pub const INTERVAL_POINTS: usize = 401;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gauge {
    HalfDensity,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngularMode {
    /// Fourier order `m` on circles, sine index `k >= 1` on intervals, 0 for
    /// one-dimensional ends.
    pub label: i64,
    /// Eigenvalue of `-d^2/dtheta^2`.
    pub nu: f64,
}

/// Angular eigenpairs of one end.
#[derive(Clone, Debug, PartialEq)]
pub struct EndModes {
    pub angular: Option<AngularSpace>,
    pub theta: Vec<f64>,
    /// Quadrature weights in `dtheta`.
    pub weights: Vec<f64>,
    /// Induced measure `dA / |dr|` over `dtheta` at the reference sphere.
    pub scale: f64,
    pub modes: Vec<AngularMode>,
    /// `e_m` sampled on `theta`.
    pub vectors: Vec<Vec<C64>>,
}

impl EndModes {
    /// Samples of `e^_m = s^{1/2} e_m`.
    pub fn unit_vector(&self, j: usize) -> Vec<C64> {
        let s = self.scale.sqrt();
        self.vectors[j].iter().map(|v| v * s).collect()
    }

    /// Gram matrix of the stored vectors in the reference measure.
    pub fn gram(&self) -> Vec<Vec<C64>> {
        let n = self.vectors.len();
        let mut g = vec![vec![C64::new(0.0, 0.0); n]; n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for (j, w) in self.weights.iter().enumerate() {
                    acc += self.vectors[a][j].conj() * self.vectors[b][j] * (w * self.scale);
                }
                g[a][b] = acc;
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeBasis {
    pub ends: Vec<EndModes>,
    /// Requested truncation.
    pub m: usize,
}

impl ModeBasis {
    pub fn n_modes(&self) -> usize {
        self.ends[0].modes.len()
    }

    pub fn nu(&self, j: usize) -> f64 {
        self.ends[0].modes[j].nu
    }

    pub fn labels(&self) -> Vec<i64> {
        self.ends[0].modes.iter().map(|m| m.label).collect()
    }

    pub fn index_of(&self, label: i64) -> Option<usize> {
        self.ends[0].modes.iter().position(|m| m.label == label)
    }
}

fn interval_eigen(n_points: usize, count: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let h = 2.0 / (n_points - 1) as f64;
    let n = n_points - 2;
    let diag = vec![2.0 / (h * h); n];
    let off = vec![-1.0 / (h * h); n - 1];
    let (vals, vecs) = symmetric_tridiagonal_eigen(&diag, &off);
    let vecs = vecs
        .into_iter()
        .take(count)
        .map(|v| {
            let sgn = if v[0] < 0.0 { -1.0 } else { 1.0 };
            let mut full = vec![0.0; n_points];
            for (i, x) in v.iter().enumerate() {
                full[i + 1] = sgn * x / h.sqrt();
            }
            full
        })
        .collect();
    (vals.into_iter().take(count).collect(), vecs)
}

/// Dirichlet eigenpairs of `-d^2/dtheta^2` on `(-1, 1)`: eigenvectors from the
/// fine grid, eigenvalues Richardson-extrapolated against the half grid.
pub fn interval_modes(
    n_points: usize,
    count: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if n_points < 9 || n_points.is_multiple_of(2) {
        return Err(Error::Config(
            "interval grid needs an odd number of points >= 9".into(),
        ));
    }
    if count == 0 || count > (n_points - 1) / 4 {
        return Err(Error::Resolution(format!(
            "{count} interval modes exceed a quarter of the {n_points}-point angular grid"
        )));
    }
    let theta: Vec<f64> = (0..n_points)
        .map(|j| -1.0 + 2.0 * j as f64 / (n_points - 1) as f64)
        .collect();
    let (fine, vecs) = interval_eigen(n_points, count);
    let (coarse, _) = interval_eigen(n_points.div_ceil(2), count);
    let nu = fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect();
    Ok((theta, nu, vecs))
}

fn trapezoid_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| {
            let a = if i == 0 { t[0] } else { t[i - 1] };
            let b = if i + 1 == n { t[n - 1] } else { t[i + 1] };
            0.5 * (b - a)
        })
        .collect()
}

/// Builds the basis with the default angular grids.
pub fn build_mode_basis(model: &ManifoldModel, m: usize) -> Result<ModeBasis> {
    build_mode_basis_with(model, m, None)
}

/// Builds the basis; `n_theta` overrides the default angular grid size.
pub fn build_mode_basis_with(
    model: &ManifoldModel,
    m: usize,
    n_theta: Option<usize>,
) -> Result<ModeBasis> {
    if m == 0 {
        return Err(Error::Config("mode truncation M must be >= 1".into()));
    }
    model.validate()?;
    let line = if model.is_parabolic() {
        None
    } else {
        Some(LineGeometry::new(model)?)
    };
    let mut ends = vec![];
    for (e, chart) in model.ends.iter().enumerate() {
        let scale = line.as_ref().map_or(1.0, |g| g.reference_measure(e));
        let angular = match &chart.kind {
            ChartKind::Warped { d: 1, .. } => None,
            ChartKind::Warped { angular, .. } => Some(*angular),
            ChartKind::Parabolic { .. } => Some(AngularSpace::Interval),
        };
        let em = match angular {
            None => EndModes {
                angular: None,
                theta: vec![0.0],
                weights: vec![1.0],
                scale,
                modes: vec![AngularMode { label: 0, nu: 0.0 }],
                vectors: vec![vec![C64::new(scale.powf(-0.5), 0.0)]],
            },
            Some(AngularSpace::Circle) => {
                let n = n_theta.unwrap_or(CIRCLE_POINTS);
                if 4 * m > n {
                    return Err(Error::Resolution(format!(
                        "M = {m} exceeds a quarter of the {n}-point circle grid"
                    )));
                }
                let theta: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
                let mut modes = vec![AngularMode { label: 0, nu: 0.0 }];
                for k in 1..=m as i64 {
                    for l in [k, -k] {
                        modes.push(AngularMode {
                            label: l,
                            nu: (k * k) as f64,
                        });
                    }
                }
                let norm = (TAU * scale).powf(-0.5);
                let vectors = modes
                    .iter()
                    .map(|md| {
                        theta
                            .iter()
                            .map(|t| C64::from_polar(norm, md.label as f64 * t))
                            .collect()
                    })
                    .collect();
                EndModes {
                    angular,
                    weights: vec![TAU / n as f64; n],
                    theta,
                    scale,
                    modes,
                    vectors,
                }
            }
            Some(AngularSpace::Interval) => {
                let n = n_theta.unwrap_or(INTERVAL_POINTS);
                let (theta, nu, vecs) = interval_modes(n, m)?;
                let inv = scale.powf(-0.5);
                EndModes {
                    angular,
                    weights: trapezoid_weights(&theta),
                    theta,
                    scale,
                    modes: nu
                        .iter()
                        .enumerate()
                        .map(|(k, v)| AngularMode {
                            label: k as i64 + 1,
                            nu: *v,
                        })
                        .collect(),
                    vectors: vecs
                        .iter()
                        .map(|v| v.iter().map(|x| C64::new(x * inv, 0.0)).collect())
                        .collect(),
                }
            }
        };
        ends.push(em);
    }
    let first = &ends[0];
    for other in &ends[1..] {
        if other.theta != first.theta || other.modes.len() != first.modes.len() {
            return Err(Error::Model(
                "glued ends must share the angular space".into(),
            ));
        }
    }
    Ok(ModeBasis { ends, m })
}

/// Default truncation: all modes whose angular energy at `Rmax` stays below
/// `lambda / 4`, plus two evanescent ones.
pub fn default_mode_count(model: &ManifoldModel, lambda: f64) -> Result<usize> {
    let g = LineGeometry::new(model)?;
    if g.d == 1 {
        return Ok(1);
    }
    let mut m = 0usize;
    for e in 0..g.n_ends() {
        let (lo, hi) = g.x_range();
        let x = if g.outward(e) > 0.0 { hi } else { lo };
        let f2 = (2.0 * g.warp(x).ln_f).exp();
        let angular = model.ends[e].angular().unwrap_or_default();
        let mut k = 0usize;
        loop {
            let nu = match angular {
                AngularSpace::Circle => ((k + 1) * (k + 1)) as f64,
                AngularSpace::Interval => ((k + 1) as f64 * PI / 2.0).powi(2),
            };
            if nu / (2.0 * f2) >= lambda / 4.0 || k > 4096 {
                break;
            }
            k += 1;
        }
        m = m.max(k);
    }
    let cap = match model.ends[0].angular().unwrap_or_default() {
        AngularSpace::Circle => CIRCLE_POINTS / 4,
        AngularSpace::Interval => (INTERVAL_POINTS - 1) / 4,
    };
    Ok((m + 2).clamp(1, cap))
}

/// Per-mode radial profiles on a line grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeFunction {
    pub gauge: Gauge,
    pub x: Vec<f64>,
    pub end: Vec<usize>,
    pub r: Vec<f64>,
    pub labels: Vec<i64>,
    /// `u[mode][node]`.
    pub u: Vec<Vec<C64>>,
}

/// Quadrature weights of the node cells `[x_i - h/2, x_i + h/2]` clipped to
/// the grid.
pub fn cell_weights(x: &[f64]) -> Vec<f64> {
    trapezoid_weights(x)
}

impl ModeFunction {
    pub fn zeros(geom: &LineGeometry, x: &[f64], labels: &[i64], gauge: Gauge) -> Self {
        ModeFunction {
            gauge,
            x: x.to_vec(),
            end: x.iter().map(|t| geom.end_of(*t)).collect(),
            r: x.iter().map(|t| geom.r(*t).r).collect(),
            labels: labels.to_vec(),
            u: vec![vec![C64::new(0.0, 0.0); x.len()]; labels.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn n_modes(&self) -> usize {
        self.labels.len()
    }

    /// `sum_m int |u_m|^2 dx` (the `L^2` norm squared in half-density gauge).
    pub fn norm_sq(&self) -> f64 {
        let w = cell_weights(&self.x);
        self.u
            .iter()
            .map(|um| {
                um.iter()
                    .zip(&w)
                    .map(|(v, wi)| v.norm_sqr() * wi)
                    .sum::<f64>()
            })
            .sum()
    }

    /// `<self, other>` with the cell quadrature, conjugate-linear in `self`.
    pub fn inner(&self, other: &ModeFunction) -> Result<C64> {
        self.check_compatible(other)?;
        let w = cell_weights(&self.x);
        let mut acc = C64::new(0.0, 0.0);
        for (a, b) in self.u.iter().zip(&other.u) {
            for i in 0..a.len() {
                acc += a[i].conj() * b[i] * w[i];
            }
        }
        Ok(acc)
    }

    pub fn check_compatible(&self, other: &ModeFunction) -> Result<()> {
        if self.x != other.x || self.labels != other.labels || self.gauge != other.gauge {
            return Err(Error::Shape(
                "mode functions live on different grids or mode sets".into(),
            ));
        }
        Ok(())
    }

    pub fn scale(&self, c: C64) -> ModeFunction {
        let mut out = self.clone();
        for um in &mut out.u {
            for v in um.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    /// `self + c other`.
    pub fn axpy(&self, c: C64, other: &ModeFunction) -> Result<ModeFunction> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.u.iter_mut().zip(&other.u) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += c * y;
            }
        }
        Ok(out)
    }

    /// Converts between the half-density and geometric gauges.
    pub fn to_gauge(&self, geom: &LineGeometry, gauge: Gauge) -> ModeFunction {
        if gauge == self.gauge || geom.d == 1 {
            return ModeFunction {
                gauge,
                ..self.clone()
            };
        }
        let half: Vec<f64> = self
            .x
            .iter()
            .map(|t| (0.5 * geom.warp(*t).ln_f).exp())
            .collect();
        let mut out = self.clone();
        out.gauge = gauge;
        for um in &mut out.u {
            for (v, s) in um.iter_mut().zip(&half) {
                match gauge {
                    Gauge::Geometric => *v /= s,
                    Gauge::HalfDensity => *v *= s,
                }
            }
        }
        out
    }

    /// Writes `(end, mode, r, re, im)` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["end", "mode", "r", "re", "im"])?;
        for (k, um) in self.u.iter().enumerate() {
            for i in 0..self.len() {
                wr.write_record([
                    self.end[i].to_string(),
                    self.labels[k].to_string(),
                    format!("{:.17e}", self.r[i]),
                    format!("{:.17e}", um[i].re),
                    format!("{:.17e}", um[i].im),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Rebuilds a mode function from CSV rows; every mode must list the same
    /// nodes.
    pub fn from_rows(rows: &[ModeRow], geom: &LineGeometry, gauge: Gauge) -> Result<ModeFunction> {
        if rows.is_empty() {
            return Err(Error::Shape("no rows".into()));
        }
        let mut labels: Vec<i64> = vec![];
        for r in rows {
            if !labels.contains(&r.mode) {
                labels.push(r.mode);
            }
        }
        let mut nodes: Vec<(f64, usize, f64)> = rows
            .iter()
            .filter(|r| r.mode == labels[0])
            .map(|r| {
                if r.end >= geom.n_ends() {
                    return Err(Error::Shape(format!("end {} out of range", r.end)));
                }
                let (r0, rm) = (geom.r0(r.end), geom.r_max(r.end));
                let w = geom.model.smoothing_width;
                let lo = if geom.n_ends() == 1 { r0 } else { w };
                if !(r.r >= lo - 1e-9 && r.r <= rm + 1e-9) {
                    return Err(Error::Shape(format!("r = {} outside end {}", r.r, r.end)));
                }
                Ok((geom.x_of_r(r.end, r.r), r.end, r.r))
            })
            .collect::<Result<_>>()?;
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = nodes.len();
        if nodes.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Shape("repeated nodes".into()));
        }
        let mut f = ModeFunction {
            gauge,
            x: nodes.iter().map(|t| t.0).collect(),
            end: nodes.iter().map(|t| t.1).collect(),
            r: nodes.iter().map(|t| t.2).collect(),
            labels: labels.clone(),
            u: vec![vec![C64::new(0.0, 0.0); n]; labels.len()],
        };
        let mut seen = vec![vec![false; n]; labels.len()];
        for row in rows {
            let k = labels.iter().position(|l| *l == row.mode).unwrap();
            let i = nodes
                .iter()
                .position(|t| t.1 == row.end && (t.2 - row.r).abs() <= 1e-12 * row.r.abs().max(1.0))
                .ok_or_else(|| {
                    Error::Shape(format!("mode {} has an extra node r = {}", row.mode, row.r))
                })?;
            if seen[k][i] {
                return Err(Error::Shape("duplicate row".into()));
            }
            seen[k][i] = true;
            f.u[k][i] = row.u;
        }
        if seen.iter().flatten().any(|s| !s) {
            return Err(Error::Shape("modes are sampled on different nodes".into()));
        }
        Ok(f)
    }
}

/// One CSV record of a mode function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeRow {
    pub end: usize,
    pub mode: i64,
    pub r: f64,
    pub u: C64,
}

#[derive(Deserialize)]
struct RawRow {
    end: usize,
    mode: i64,
    r: f64,
    re: f64,
    im: f64,
}

/// Parses `(end, mode, r, re, im)` CSV with a header line.
pub fn read_mode_csv<R: Read>(input: R) -> Result<Vec<ModeRow>> {
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = rd
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .clone();
    let want = ["end", "mode", "r", "re", "im"];
    if headers.len() != want.len() || headers.iter().zip(want).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!(
            "expected header end,mode,r,re,im, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = vec![];
    for rec in rd.deserialize::<RawRow>() {
        let row = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if ![row.r, row.re, row.im].iter().all(|v| v.is_finite()) {
            return Err(Error::Parse("non-finite value".into()));
        }
        out.push(ModeRow {
            end: row.end,
            mode: row.mode,
            r: row.r,
            u: C64::new(row.re, row.im),
        });
    }
    Ok(out)
}

/// Geometric wavefunction samples `phi(x_i, theta_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularSamples {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    /// `values[i][j] = phi(x_i, theta_j)`.
    pub values: Vec<Vec<C64>>,
}

impl AngularSamples {
    /// `int |phi|^2 F dx dtheta` with the node and angular quadratures.
    pub fn norm_sq(&self, geom: &LineGeometry, basis: &ModeBasis) -> f64 {
        let wx = cell_weights(&self.x);
        let wt = &basis.ends[0].weights;
        let mut acc = 0.0;
        for (i, row) in self.values.iter().enumerate() {
            let f = if geom.d == 1 {
                1.0
            } else {
                geom.warp(self.x[i]).f()
            };
            for (j, v) in row.iter().enumerate() {
                acc += v.norm_sqr() * wt[j] * wx[i] * f;
            }
        }
        acc
    }
}

/// Projects geometric samples onto the basis (half-density gauge).
pub fn to_modes(
    geom: &LineGeometry,
    basis: &ModeBasis,
    samples: &AngularSamples,
) -> Result<ModeFunction> {
    let em = &basis.ends[0];
    if samples.theta != em.theta {
        return Err(Error::Shape(
            "angular grid differs from the basis grid".into(),
        ));
    }
    if samples.values.len() != samples.x.len()
        || samples.values.iter().any(|r| r.len() != em.theta.len())
    {
        return Err(Error::Shape("sample table has the wrong shape".into()));
    }
    let mut f = ModeFunction::zeros(geom, &samples.x, &basis.labels(), Gauge::HalfDensity);
    let units: Vec<Vec<C64>> = (0..basis.n_modes()).map(|k| em.unit_vector(k)).collect();
    for (i, row) in samples.values.iter().enumerate() {
        let half = if geom.d == 1 {
            1.0
        } else {
            (0.5 * geom.warp(samples.x[i]).ln_f).exp()
        };
        for (k, e) in units.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..row.len() {
                acc += e[j].conj() * row[j] * em.weights[j];
            }
            f.u[k][i] = acc * half;
        }
    }
    Ok(f)
}

/// Synthesizes geometric samples from mode profiles in either gauge.
pub fn from_modes(
    geom: &LineGeometry,
    basis: &ModeBasis,
    f: &ModeFunction,
) -> Result<AngularSamples> {
    if f.labels != basis.labels() {
        return Err(Error::Shape("mode labels differ from the basis".into()));
    }
    let em = &basis.ends[0];
    let units: Vec<Vec<C64>> = (0..basis.n_modes()).map(|k| em.unit_vector(k)).collect();
    let g = f.to_gauge(geom, Gauge::Geometric);
    let values = (0..f.len())
        .map(|i| {
            (0..em.theta.len())
                .map(|j| units.iter().zip(&g.u).map(|(e, u)| e[j] * u[i]).sum())
                .collect()
        })
        .collect();
    Ok(AngularSamples {
        x: f.x.clone(),
        theta: em.theta.clone(),
        values,
    })
}

/// Coefficients of a vector of the limiting space per end and mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub lambda: f64,
    pub labels: Vec<i64>,
    /// `coeffs[end][mode]`.
    pub coeffs: Vec<Vec<C64>>,
}

impl BoundaryData {
    pub fn zeros(lambda: f64, n_ends: usize, labels: &[i64]) -> Self {
        BoundaryData {
            lambda,
            labels: labels.to_vec(),
            coeffs: vec![vec![C64::new(0.0, 0.0); labels.len()]; n_ends],
        }
    }

    pub fn unit(lambda: f64, n_ends: usize, labels: &[i64], end: usize, mode: usize) -> Self {
        let mut b = Self::zeros(lambda, n_ends, labels);
        b.coeffs[end][mode] = C64::new(1.0, 0.0);
        b
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().flatten().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Angular function on the reference sphere of an end.
    pub fn reconstruct(&self, basis: &ModeBasis, end: usize) -> Vec<C64> {
        let em = &basis.ends[end];
        (0..em.theta.len())
            .map(|j| {
                self.coeffs[end]
                    .iter()
                    .zip(&em.vectors)
                    .map(|(c, v)| c * v[j])
                    .sum()
            })
            .collect()
    }

    /// Norm of the reconstructed function in the reference measure.
    pub fn quadrature_norm_sq(&self, basis: &ModeBasis) -> f64 {
        (0..self.coeffs.len())
            .map(|e| {
                let em = &basis.ends[e];
                self.reconstruct(basis, e)
                    .iter()
                    .zip(&em.weights)
                    .map(|(v, w)| v.norm_sqr() * w * em.scale)
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Per-mode radial operator `-1/2 d^2/dx^2 + W_m(x)` in half-density gauge.
#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub geom: LineGeometry,
    pub label: i64,
    pub nu: f64,
}

impl ModeOperator {
    /// `W_m = nu / (2 F^2) + Liouville term + V`.
    pub fn potential(&self, x: f64) -> f64 {
        self.geom.mode_potential(x, self.nu)
    }

    /// Applies the operator with second-order differences at interior nodes
    /// of a uniform grid (zero at the two end nodes).
    pub fn apply(&self, x: &[f64], u: &[C64]) -> Vec<C64> {
        let n = x.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        if n < 3 {
            return out;
        }
        let h = x[1] - x[0];
        for i in 1..n - 1 {
            out[i] =
                (u[i + 1] - u[i] * 2.0 + u[i - 1]) * (-0.5 / (h * h)) + u[i] * self.potential(x[i]);
        }
        out
    }
}

pub fn assemble_mode_hamiltonian(
    model: &ManifoldModel,
    basis: &ModeBasis,
    mode: usize,
) -> Result<ModeOperator> {
    if model.is_parabolic() {
        return Err(Error::NonSeparable(
            "parabolic ends do not separate; use the frozen-coefficient solver of the counterexample module".into(),
        ));
    }
    if !model.potential.is_separable() {
        return Err(Error::NonSeparable(
            "the potential depends on the angle; a full two-dimensional discretization is required"
                .into(),
        ));
    }
    if mode >= basis.n_modes() {
        return Err(Error::Config(format!("mode index {mode} out of range")));
    }
    Ok(ModeOperator {
        geom: LineGeometry::new(model)?,
        label: basis.ends[0].modes[mode].label,
        nu: basis.nu(mode),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{EndChart, Potential, WarpProfile};

    fn surface(f: WarpProfile, angular: AngularSpace) -> ManifoldModel {
        ManifoldModel::single(EndChart::warped(2, f, angular, 1.0, 16.0), Potential::Zero)
    }

    #[test]
    fn circle_eigenvalues() {
        let b =
            build_mode_basis(&surface(WarpProfile::linear(1.0), AngularSpace::Circle), 3).unwrap();
        let nu: Vec<f64> = b.ends[0].modes.iter().map(|m| m.nu).collect();
        assert_eq!(nu, vec![0.0, 1.0, 1.0, 4.0, 4.0, 9.0, 9.0]);
        assert!(nu.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn interval_eigenvalues_converge() {
        let (_, nu, _) = interval_modes(INTERVAL_POINTS, 2).unwrap();
        assert!(
            (0.5 * nu[0] - PI * PI / 8.0).abs() < 1e-8,
            "{}",
            0.5 * nu[0] - PI * PI / 8.0
        );
        assert!((0.5 * nu[1] - PI * PI / 2.0).abs() < 1e-8);
    }

    #[test]
    fn interval_vectors_are_sampled_sines() {
        let (theta, _, v) = interval_modes(INTERVAL_POINTS, 3).unwrap();
        for (k, vk) in v.iter().enumerate() {
            let kk = (k + 1) as f64;
            for (j, t) in theta.iter().enumerate() {
                let exact = (kk * PI * (t + 1.0) / 2.0).sin();
                assert!((vk[j] - exact).abs() < 1e-9, "k={kk}");
            }
        }
    }

    #[test]
    fn bases_are_orthonormal_in_the_reference_measure() {
        for (f, a) in [
            (WarpProfile::linear(1.0), AngularSpace::Circle),
            (WarpProfile::constant(2.5), AngularSpace::Interval),
        ] {
            let b = build_mode_basis(&surface(f, a), 6).unwrap();
            let g = b.ends[0].gram();
            for (i, row) in g.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn too_many_modes_is_a_resolution_error() {
        let m = surface(WarpProfile::linear(1.0), AngularSpace::Circle);
        assert!(matches!(
            build_mode_basis(&m, 17),
            Err(Error::Resolution(_))
        ));
        assert!(build_mode_basis(&m, 16).is_ok());
    }

    #[test]
    fn single_fourier_mode_projects_cleanly() {
        let model = surface(WarpProfile::linear(1.0), AngularSpace::Circle);
        let g = LineGeometry::new(&model).unwrap();
        let b = build_mode_basis(&model, 2).unwrap();
        let x: Vec<f64> = (0..20).map(|i| 1.0 + 0.5 * i as f64).collect();
        let gr = |r: f64| (-(r - 5.0).powi(2)).exp();
        let samples = AngularSamples {
            x: x.clone(),
            theta: b.ends[0].theta.clone(),
            values: x
                .iter()
                .map(|r| {
                    b.ends[0]
                        .theta
                        .iter()
                        .map(|t| C64::from_polar(gr(*r), *t))
                        .collect()
                })
                .collect(),
        };
        let f = to_modes(&g, &b, &samples).unwrap();
        let k1 = b.index_of(1).unwrap();
        for (k, um) in f.u.iter().enumerate() {
            for (i, v) in um.iter().enumerate() {
                let want = if k == k1 {
                    gr(x[i]) * (x[i] * TAU).sqrt()
                } else {
                    0.0
                };
                assert!((v - want).norm() < 1e-12);
            }
        }
        let back = from_modes(&g, &b, &f).unwrap();
        for (a, c) in back
            .values
            .iter()
            .flatten()
            .zip(samples.values.iter().flatten())
        {
            assert!((a - c).norm() < 1e-12);
        }
        assert!((f.norm_sq() - samples.norm_sq(&g, &b)).abs() < 1e-12 * f.norm_sq());
    }

    #[test]
    fn mode_operators_match_closed_forms() {
        let cone = surface(WarpProfile::linear(1.0), AngularSpace::Circle);
        let b = build_mode_basis(&cone, 2).unwrap();
        let h0 = assemble_mode_hamiltonian(&cone, &b, 0).unwrap();
        for r in [1.5, 3.0, 10.0] {
            assert!((h0.potential(r) + 1.0 / (8.0 * r * r)).abs() < 1e-12);
        }
        let cyl = surface(WarpProfile::constant(1.0), AngularSpace::Circle);
        let b = build_mode_basis(&cyl, 2).unwrap();
        let k = b.index_of(2).unwrap();
        let h2 = assemble_mode_hamiltonian(&cyl, &b, k).unwrap();
        assert!((h2.potential(3.0) - 2.0).abs() < 1e-12);
        let funnel = surface(WarpProfile::exponential(), AngularSpace::Circle);
        let b = build_mode_basis(&funnel, 1).unwrap();
        let h = assemble_mode_hamiltonian(&funnel, &b, 0).unwrap();
        assert!((h.potential(4.0) - 0.125).abs() < 1e-10);
    }

    #[test]
    fn angular_potential_is_refused() {
        let mut m = surface(WarpProfile::linear(1.0), AngularSpace::Circle);
        m.potential = Potential::AngularBump {
            amplitude: 1.0,
            center: 3.0,
            width: 1.0,
        };
        let b = build_mode_basis(&m, 1).unwrap();
        assert!(matches!(
            assemble_mode_hamiltonian(&m, &b, 0),
            Err(Error::NonSeparable(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let model = ManifoldModel::two_ended_surface(AngularSpace::Circle, 16.0, Potential::Zero);
        let g = LineGeometry::new(&model).unwrap();
        let x: Vec<f64> = (0..11).map(|i| -5.0 + i as f64).collect();
        let mut f = ModeFunction::zeros(&g, &x, &[0, 1, -1], Gauge::HalfDensity);
        for (k, um) in f.u.iter_mut().enumerate() {
            for (i, v) in um.iter_mut().enumerate() {
                *v = C64::new(i as f64 * 0.1, k as f64 - 0.3);
            }
        }
        let mut buf = vec![];
        f.write_csv(&mut buf).unwrap();
        let rows = read_mode_csv(&buf[..]).unwrap();
        let back = ModeFunction::from_rows(&rows, &g, Gauge::HalfDensity).unwrap();
        assert_eq!(back.labels, f.labels);
        for (a, b) in back.x.iter().zip(&f.x) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in back.u.iter().flatten().zip(f.u.iter().flatten()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_mode_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_mode_csv("end,mode,r,re,im\n0,0,x,1,2\n".as_bytes()).is_err());
        assert!(read_mode_csv("end,mode,r,re,im\n0,0,NaN,1,2\n".as_bytes()).is_err());
    }
}
