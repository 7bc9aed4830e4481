//! Scattering matrices assembled column by column from generalized
//! eigenfunctions, their end blocks, and the one-dimensional well benchmark.

use crate::fourier::generalized_eigenfunction;
use crate::geometry::{LineGeometry, ManifoldModel, Potential};
use crate::linalg::singular_values;
use crate::modes::{build_mode_basis, BoundaryData, ModeBasis};
use crate::solver::LineGrid;
use crate::{Error, Result, C64};
use serde::Serialize;
use std::io::Write;

/// Relative distance `(lambda - W_m(Rmax)) / lambda` below which a mode is
/// flagged as near its opening threshold.
pub const THRESHOLD_MARGIN: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChannelIndex {
    pub end: usize,
    /// Position in the basis.
    pub mode: usize,
    pub label: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSigma {
    pub row_end: usize,
    pub col_end: usize,
    pub sigma_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatteringMatrix {
    pub lambda: f64,
    pub index: Vec<ChannelIndex>,
    /// `entries[row][col]`.
    pub entries: Vec<Vec<C64>>,
    pub unitarity_defect: f64,
    pub converged: bool,
    /// `| |xi+| - |xi-| | / |xi-|` per column.
    pub column_norm_defects: Vec<f64>,
    pub column_cauchy: Vec<f64>,
    pub max_eigen_residual: f64,
    /// Some propagating mode is within the threshold margin at Rmax.
    pub near_threshold: bool,
    pub blocks_sigma_min: Vec<BlockSigma>,
    pub n_ends: usize,
}

/// Channels `(end, mode)` whose mode potential at the outer boundary lies
/// below `lambda`, and whether any of them is close to it.
pub fn propagating_channels(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    lambda: f64,
) -> (Vec<ChannelIndex>, bool) {
    let x = grid.nodes();
    let labels = basis.labels();
    let mut out = vec![];
    let mut near = false;
    for e in 0..geom.n_ends() {
        let xb = if geom.outward(e) > 0.0 {
            x[x.len() - 1]
        } else {
            x[0]
        };
        for (m, label) in labels.iter().enumerate() {
            let gap = lambda - geom.mode_potential(xb, basis.nu(m));
            if gap > 0.0 {
                near |= gap < THRESHOLD_MARGIN * lambda.abs();
                out.push(ChannelIndex {
                    end: e,
                    mode: m,
                    label: *label,
                });
            }
        }
    }
    (out, near)
}

/// Assembles `S(lambda)` on the propagating channels.
pub fn build_smatrix(
    geom: &LineGeometry,
    basis: &ModeBasis,
    grid: &LineGrid,
    lambda: f64,
) -> Result<ScatteringMatrix> {
    let (index, near) = propagating_channels(geom, basis, grid, lambda);
    if index.is_empty() {
        return Err(Error::Spectral(format!(
            "no propagating channel at lambda = {lambda}"
        )));
    }
    let labels = basis.labels();
    let n = index.len();
    let mut entries = vec![vec![C64::new(0.0, 0.0); n]; n];
    let mut defects = vec![];
    let mut cauchy = vec![];
    let mut converged = true;
    let mut max_res: f64 = 0.0;
    for (j, col) in index.iter().enumerate() {
        let xm = BoundaryData::unit(lambda, geom.n_ends(), &labels, col.end, col.mode);
        let g = generalized_eigenfunction(geom, basis, grid, lambda, &xm)?;
        for (i, row) in index.iter().enumerate() {
            entries[i][j] = g.xi_plus.coeffs[row.end][row.mode];
        }
        defects.push((g.xi_plus.norm() - 1.0).abs());
        cauchy.push(g.inner.cauchy);
        converged &= g.converged;
        max_res = max_res.max(g.eigen_residual);
    }
    let mut s = ScatteringMatrix {
        lambda,
        index,
        entries,
        unitarity_defect: 0.0,
        converged,
        column_norm_defects: defects,
        column_cauchy: cauchy,
        max_eigen_residual: max_res,
        near_threshold: near,
        blocks_sigma_min: vec![],
        n_ends: geom.n_ends(),
    };
    s.unitarity_defect = unitarity_check(&s);
    s.blocks_sigma_min = end_blocks(&s)
        .iter()
        .map(|b| BlockSigma {
            row_end: b.row_end,
            col_end: b.col_end,
            sigma_min: b.singular_values().last().copied().unwrap_or(0.0),
        })
        .collect();
    Ok(s)
}

/// `|S^* S - I|_F`.
pub fn unitarity_check(s: &ScatteringMatrix) -> f64 {
    frobenius_unitarity(&s.entries)
}

fn frobenius_unitarity(a: &[Vec<C64>]) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut v: C64 = (0..n).map(|k| a[k][i].conj() * a[k][j]).sum();
            if i == j {
                v -= 1.0;
            }
            acc += v.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Block `S_ij` mapping incoming data on end `j` to outgoing data on end `i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndBlock {
    pub row_end: usize,
    pub col_end: usize,
    pub row_labels: Vec<i64>,
    pub col_labels: Vec<i64>,
    pub entries: Vec<Vec<C64>>,
}

impl EndBlock {
    pub fn singular_values(&self) -> Vec<f64> {
        let flat: Vec<C64> = self.entries.iter().flatten().copied().collect();
        singular_values(self.row_labels.len(), self.col_labels.len(), &flat)
    }
}

pub fn end_blocks(s: &ScatteringMatrix) -> Vec<EndBlock> {
    let mut out = vec![];
    for i in 0..s.n_ends {
        for j in 0..s.n_ends {
            let rows: Vec<usize> = (0..s.index.len())
                .filter(|&k| s.index[k].end == i)
                .collect();
            let cols: Vec<usize> = (0..s.index.len())
                .filter(|&k| s.index[k].end == j)
                .collect();
            out.push(EndBlock {
                row_end: i,
                col_end: j,
                row_labels: rows.iter().map(|&k| s.index[k].label).collect(),
                col_labels: cols.iter().map(|&k| s.index[k].label).collect(),
                entries: rows
                    .iter()
                    .map(|&r| cols.iter().map(|&c| s.entries[r][c]).collect())
                    .collect(),
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Injectivity {
    pub row_end: usize,
    pub col_end: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub sigma_min: f64,
    pub note: String,
}

/// Singular values of the transmission block `S_ij`, `i != j`.
pub fn transmission_injectivity(s: &ScatteringMatrix, i: usize, j: usize) -> Result<Injectivity> {
    if s.n_ends < 2 {
        return Err(Error::Model("transmission needs at least two ends".into()));
    }
    if i == j || i >= s.n_ends || j >= s.n_ends {
        return Err(Error::Config(format!("invalid end pair ({i}, {j})")));
    }
    let block = end_blocks(s)
        .into_iter()
        .find(|b| b.row_end == i && b.col_end == j)
        .ok_or_else(|| Error::Config("block not found".into()))?;
    let sv = block.singular_values();
    Ok(Injectivity {
        row_end: i,
        col_end: j,
        sigma_min: sv.last().copied().unwrap_or(0.0),
        note: format!(
            "restricted to {} x {} propagating channels at Rmax; evanescent channels are truncated",
            block.row_labels.len(),
            block.col_labels.len()
        ),
        singular_values: sv,
    })
}

/// `|S - P S P|_F` for the permutation `P` swapping ends 0 and 1 mode-wise.
pub fn end_swap_defect(s: &ScatteringMatrix) -> Result<f64> {
    if s.n_ends != 2 {
        return Err(Error::Model("end swap needs exactly two ends".into()));
    }
    let n = s.index.len();
    let perm: Vec<usize> = s
        .index
        .iter()
        .map(|c| {
            s.index
                .iter()
                .position(|d| d.end == 1 - c.end && d.mode == c.mode)
                .ok_or_else(|| Error::Shape("channel sets of the two ends differ".into()))
        })
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (s.entries[i][j] - s.entries[perm[i]][perm[j]]).norm_sqr();
        }
    }
    Ok(acc.sqrt())
}

/// `|S(a) - S(b)|_F` for matrices on the same channels.
pub fn frobenius_distance(a: &ScatteringMatrix, b: &ScatteringMatrix) -> Result<f64> {
    if a.index != b.index {
        return Err(Error::Shape("channel sets differ".into()));
    }
    Ok(a.entries
        .iter()
        .flatten()
        .zip(b.entries.iter().flatten())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Transmission and reflection amplitudes `(t, r)` for a wave incoming from
/// the left through non-overlapping constant layers `(x_left, x_right, V)`,
/// by plane-wave matching at every interface. The potential vanishes outside.
pub fn layered_amplitudes(lambda: f64, layers: &[(f64, f64, f64)]) -> (C64, C64) {
    let i = C64::new(0.0, 1.0);
    let q = |v: f64| C64::new(2.0 * (lambda - v), 0.0).sqrt();
    let mut sorted = layers.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // interfaces (x0, V left, V right) from left to right
    let mut faces = vec![];
    for &(a, b, v) in &sorted {
        faces.push((a, 0.0, v));
        faces.push((b, v, 0.0));
    }
    // (A, B) of A e^{iqx} + B e^{-iqx}, starting with the transmitted wave
    let mut coef = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for &(x0, vl, vr) in faces.iter().rev() {
        let (ql, qr) = (q(vl), q(vr));
        let er = (i * qr * x0).exp();
        let psi = coef[0] * er + coef[1] / er;
        let dpsi = i * qr * (coef[0] * er - coef[1] / er);
        let el = (i * ql * x0).exp();
        coef = [
            (psi + dpsi / (i * ql)) / (el * 2.0),
            (psi - dpsi / (i * ql)) * el / 2.0,
        ];
    }
    (C64::new(1.0, 0.0) / coef[0], coef[1] / coef[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub lambda: f64,
    pub t2_analytic: f64,
    pub t2_computed: f64,
    pub r2_analytic: f64,
    pub r2_computed: f64,
    pub unitarity_defect: f64,
    pub converged: bool,
}

/// Discretization of the one-dimensional benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BenchmarkGrid {
    /// The line is `[-x_max, x_max]`.
    pub x_max: f64,
    pub h: f64,
}

impl Default for BenchmarkGrid {
    fn default() -> Self {
        BenchmarkGrid {
            x_max: 40.0,
            h: 0.01,
        }
    }
}

/// Square well `-depth` on `|x| <= half_width`: analytic and PDE-path
/// transmission and reflection probabilities.
pub fn benchmark_1d(
    lambdas: &[f64],
    depth: f64,
    half_width: f64,
    grid: BenchmarkGrid,
) -> Result<Vec<BenchmarkRow>> {
    if lambdas.is_empty() {
        return Err(Error::Config("empty energy list".into()));
    }
    let potential = if depth == 0.0 {
        Potential::Zero
    } else {
        Potential::SquareWell { depth, half_width }
    };
    let model = ManifoldModel::line((grid.x_max * grid.x_max + 1.0).sqrt(), potential);
    let geom = LineGeometry::new(&model)?;
    let basis = build_mode_basis(&model, 1)?;
    let lg = LineGrid::new(&geom, grid.h)?;
    let layers = [(-half_width, half_width, -depth)];
    lambdas
        .iter()
        .map(|&lambda| {
            let s = build_smatrix(&geom, &basis, &lg, lambda)?;
            let (t, r) = layered_amplitudes(lambda, &layers);
            let pos = |end: usize| s.index.iter().position(|c| c.end == end);
            let (Some(l), Some(rt)) = (pos(0), pos(1)) else {
                return Err(Error::Spectral("both ends must propagate".into()));
            };
            Ok(BenchmarkRow {
                lambda,
                t2_analytic: t.norm_sqr(),
                t2_computed: s.entries[rt][l].norm_sqr(),
                r2_analytic: r.norm_sqr(),
                r2_computed: s.entries[l][l].norm_sqr(),
                unitarity_defect: s.unitarity_defect,
                converged: s.converged,
            })
        })
        .collect()
}

pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "lambda",
        "T2_analytic",
        "T2_computed",
        "R2_analytic",
        "R2_computed",
    ])?;
    for r in rows {
        out.write_record(&[
            format!("{}", r.lambda),
            format!("{:.12e}", r.t2_analytic),
            format!("{:.12e}", r.t2_computed),
            format!("{:.12e}", r.r2_analytic),
            format!("{:.12e}", r.r2_computed),
        ])?;
    }
    out.flush()?;
    Ok(())
}
