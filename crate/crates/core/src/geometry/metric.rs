//! Pointwise metric data and effective potentials in end charts `(r, theta)`.
//!
//! Both chart kinds are orthogonal in `(r, theta)`, so the metric is stored as
//! its two diagonal entries and the spherical tensor `l = g - |dr|^{-2} dr dr`
//! is `diag(0, g_thth)`.

use super::{ChartKind, CurvatureSplit, LineGeometry, ManifoldModel, ParabolicChart};
use crate::numerics::{chi, chi_prime, d1};
use crate::{Error, Result};
use serde::Serialize;

/// Parabolic chart data: inverse metric entries and conjugated potentials.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParabolicTerms {
    pub n_r: f64,
    pub n_theta: f64,
    pub w_r: f64,
    pub w_theta: f64,
}

/// Metric quantities at one chart point. Symmetric 2-tensors are stored as
/// `[rr, rtheta, thetatheta]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricData {
    pub r: f64,
    pub theta: f64,
    /// `[g_rr, g_thth]`.
    pub g: [f64; 2],
    pub dr2: f64,
    pub hessian: [f64; 3],
    pub lap_r: f64,
    /// `christoffel[k][i][j]` with index 0 for `r` and 1 for `theta`.
    pub christoffel: [[[f64; 2]; 2]; 2],
    /// Divergence of the normalized radial field `eta grad r / |dr|^2`.
    pub div_omega: f64,
    pub parabolic: Option<ParabolicTerms>,
}

impl MetricData {
    /// Spherical tensor `l` as `[rr, rtheta, thetatheta]`.
    pub fn ell(&self) -> [f64; 3] {
        [0.0, 0.0, self.g[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectivePotential {
    pub q: f64,
    pub q1: f64,
    pub q2: f64,
    pub split: CurvatureSplit,
}

/// Evaluator for one end, built once and reused for sampling.
pub(crate) enum EndEvaluator {
    Line {
        geom: LineGeometry,
        end: usize,
    },
    Parabolic {
        chart: ParabolicChart,
        r0: f64,
        r_max: f64,
        split: CurvatureSplit,
        long_range: super::Potential,
    },
}

impl EndEvaluator {
    pub(crate) fn new(model: &ManifoldModel, end: usize) -> Result<Self> {
        if end >= model.ends.len() {
            return Err(Error::Domain(format!("end {end} does not exist")));
        }
        model.validate()?;
        let e = &model.ends[end];
        Ok(match e.kind {
            ChartKind::Parabolic { kappa } => EndEvaluator::Parabolic {
                chart: ParabolicChart::new(kappa),
                r0: e.r0,
                r_max: e.r_max,
                split: e.split(),
                long_range: model.potential.clone(),
            },
            ChartKind::Warped { .. } => EndEvaluator::Line {
                geom: LineGeometry::new(model)?,
                end,
            },
        })
    }

    pub(crate) fn r0(&self) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => geom.r0(*end),
            EndEvaluator::Parabolic { r0, .. } => *r0,
        }
    }

    pub(crate) fn r_max(&self) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => geom.r_max(*end),
            EndEvaluator::Parabolic { r_max, .. } => *r_max,
        }
    }

    pub(crate) fn dimension(&self) -> u32 {
        match self {
            EndEvaluator::Line { geom, .. } => geom.d,
            EndEvaluator::Parabolic { .. } => 2,
        }
    }

    pub(crate) fn is_parabolic(&self) -> bool {
        matches!(self, EndEvaluator::Parabolic { .. })
    }

    /// Angular sample points used for suprema over spheres.
    pub(crate) fn theta_samples(&self, n: usize) -> Vec<f64> {
        match self {
            EndEvaluator::Line { geom, .. } if geom.d == 1 => vec![0.0],
            EndEvaluator::Line { geom, end } => match geom.model.ends[*end].angular() {
                Some(super::AngularSpace::Circle) => (0..n)
                    .map(|j| std::f64::consts::TAU * j as f64 / n as f64)
                    .collect(),
                _ => interval_samples(n),
            },
            EndEvaluator::Parabolic { .. } => interval_samples(n),
        }
    }

    fn check(&self, r: f64, theta: f64) -> Result<()> {
        let lo = 0.5 * self.r0();
        if !(r >= lo * (1.0 - 1e-12) && r <= self.r_max() * (1.0 + 1e-12)) || !theta.is_finite() {
            return Err(Error::Domain(format!(
                "r = {r} outside [{lo}, {}]",
                self.r_max()
            )));
        }
        if self.is_parabolic() && theta.abs() >= 1.0 {
            return Err(Error::Domain(format!("theta = {theta} outside (-1, 1)")));
        }
        Ok(())
    }

    /// `eta = 1 - chi(2 r / r0)` and its `r` derivative.
    pub(crate) fn eta(&self, r: f64) -> (f64, f64) {
        let r0 = self.r0();
        (1.0 - chi(2.0 * r / r0), -chi_prime(2.0 * r / r0) * 2.0 / r0)
    }

    pub(crate) fn metric(&self, r: f64, theta: f64) -> Result<MetricData> {
        self.check(r, theta)?;
        let (eta, deta) = self.eta(r);
        let mut c = [[[0.0; 2]; 2]; 2];
        Ok(match self {
            EndEvaluator::Line { geom, end } => {
                let x = geom.x_of_r(*end, r);
                let rd = geom.r(x);
                let r1 = rd.r1;
                let (lap, _) = geom.laplacian_r(x);
                let hess_rr = rd.r2 / (r1 * r1);
                let (g_tt, hess_tt, dlogf) = if geom.d == 1 {
                    (0.0, 0.0, 0.0)
                } else {
                    let w = geom.warp(x);
                    let f2 = (2.0 * w.ln_f).exp();
                    (f2, f2 * w.d1 * r1, w.d1 / r1)
                };
                c[0][0][0] = -hess_rr;
                c[0][1][1] = -hess_tt;
                c[1][0][1] = dlogf;
                c[1][1][0] = dlogf;
                let k = (geom.d - 1) as f64;
                let div_dr = (k * geom.warp(x).d1 - rd.r2 / r1) / r1;
                MetricData {
                    r,
                    theta,
                    g: [1.0 / (r1 * r1), g_tt],
                    dr2: r1 * r1,
                    hessian: [hess_rr, 0.0, hess_tt],
                    lap_r: lap,
                    christoffel: c,
                    div_omega: eta * div_dr + deta,
                    parabolic: None,
                }
            }
            EndEvaluator::Parabolic { chart, .. } => {
                let (hr, ht) = (1e-4 * r, 1e-4);
                let nr = chart.n_r(r, theta);
                let nt = chart.n_theta(r, theta);
                let nr_r = d1(|s| chart.n_r(s, theta), r, hr);
                let nr_t = d1(|s| chart.n_r(r, s), theta, ht);
                let nt_r = d1(|s| chart.n_theta(s, theta), r, hr);
                let nt_t = d1(|s| chart.n_theta(r, s), theta, ht);
                let hess = [
                    0.5 * nr_r / nr,
                    0.5 * nr_t / nr,
                    -0.5 * nr * nt_r / (nt * nt),
                ];
                c[0][0][0] = -hess[0];
                c[0][0][1] = -hess[1];
                c[0][1][0] = -hess[1];
                c[0][1][1] = -hess[2];
                c[1][0][0] = 0.5 * nt * nr_t / (nr * nr);
                c[1][0][1] = -0.5 * nt_r / nt;
                c[1][1][0] = -0.5 * nt_r / nt;
                c[1][1][1] = -0.5 * nt_t / nt;
                let div_dr = -0.5 * (nr_r / nr + nt_r / nt);
                MetricData {
                    r,
                    theta,
                    g: [1.0 / nr, 1.0 / nt],
                    dr2: nr,
                    hessian: hess,
                    lap_r: (1.0 + chart.kappa - nr) / r,
                    christoffel: c,
                    div_omega: eta * div_dr + deta,
                    parabolic: Some(ParabolicTerms {
                        n_r: nr,
                        n_theta: nt,
                        w_r: chart.w_r(r, theta),
                        w_theta: chart.w_theta(r, theta),
                    }),
                }
            }
        })
    }

    /// `|dr|^2` without the full metric evaluation.
    pub(crate) fn dr2(&self, r: f64, theta: f64) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => geom.r(geom.x_of_r(*end, r)).r1.powi(2),
            EndEvaluator::Parabolic { chart, .. } => chart.n_r(r, theta),
        }
    }

    /// `Delta r` without the full metric evaluation.
    pub(crate) fn lap_r(&self, r: f64, theta: f64) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => geom.laplacian_r(geom.x_of_r(*end, r)).0,
            EndEvaluator::Parabolic { chart, .. } => (1.0 + chart.kappa - chart.n_r(r, theta)) / r,
        }
    }

    /// `|dtheta|^2`, the factor turning `theta` derivatives into `|l grad|`.
    pub(crate) fn dtheta2(&self, r: f64, theta: f64) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => {
                if geom.d == 1 {
                    0.0
                } else {
                    (-2.0 * geom.warp(geom.x_of_r(*end, r)).ln_f).exp()
                }
            }
            EndEvaluator::Parabolic { chart, .. } => chart.n_theta(r, theta),
        }
    }

    pub(crate) fn potential(&self, r: f64, theta: f64) -> Result<EffectivePotential> {
        self.check(r, theta)?;
        Ok(match self {
            EndEvaluator::Line { geom, end } => {
                let x = geom.x_of_r(*end, r);
                let q = geom.model.potential.value(x, r, theta) + geom.curvature_potential(x);
                let q1 = geom.q1(x);
                EffectivePotential {
                    q,
                    q1,
                    q2: q - q1,
                    split: geom.model.ends[*end].split(),
                }
            }
            EndEvaluator::Parabolic {
                split, long_range, ..
            } => {
                let curv = self.parabolic_curvature(r, theta);
                let lr = long_range.long_range(r);
                let q = long_range.value(r, r, theta) + curv;
                let q1 = match split {
                    CurvatureSplit::Q1 => lr + curv,
                    CurvatureSplit::Q2 => lr,
                };
                EffectivePotential {
                    q,
                    q1,
                    q2: q - q1,
                    split: *split,
                }
            }
        })
    }

    fn parabolic_curvature(&self, r: f64, theta: f64) -> f64 {
        let (eta, _) = self.eta(r);
        if eta == 0.0 {
            return 0.0;
        }
        let nr = self.dr2(r, theta);
        let lap = self.lap_r(r, theta);
        let dlap = d1(|s| self.lap_r(s, theta), r, 1e-3 * r);
        0.125 * eta / nr * (lap * lap + 2.0 * nr * dlap)
    }

    /// `q1` without the domain check.
    pub(crate) fn q1(&self, r: f64, theta: f64) -> f64 {
        match self {
            EndEvaluator::Line { geom, end } => geom.q1(geom.x_of_r(*end, r)),
            EndEvaluator::Parabolic {
                split, long_range, ..
            } => {
                let lr = long_range.long_range(r);
                match split {
                    CurvatureSplit::Q1 => lr + self.parabolic_curvature(r, theta),
                    CurvatureSplit::Q2 => lr,
                }
            }
        }
    }

    /// `q2` without the domain check.
    pub(crate) fn q2(&self, r: f64, theta: f64) -> f64 {
        match self.potential(r, theta) {
            Ok(p) => p.q2,
            Err(_) => 0.0,
        }
    }
}

fn interval_samples(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -1.0 + 2.0 * (j as f64 + 0.5) / n as f64)
        .collect()
}

/// Metric data of end `end` at the chart point `(r, theta)`.
pub fn eval_metric(model: &ManifoldModel, end: usize, point: (f64, f64)) -> Result<MetricData> {
    EndEvaluator::new(model, end)?.metric(point.0, point.1)
}

/// Effective potential `q = V + (1/8) eta~ [(Delta r)^2 + 2 grad^r Delta r]`
/// and its splitting at a chart point.
pub fn effective_potential(
    model: &ManifoldModel,
    end: usize,
    point: (f64, f64),
) -> Result<EffectivePotential> {
    EndEvaluator::new(model, end)?.potential(point.0, point.1)
}

/// Geometric quantities on a log-spaced radial grid times an angular grid.
#[derive(Clone, Debug, Serialize)]
pub struct GeometricSamples {
    pub points: Vec<(f64, f64)>,
    pub dr2: Vec<f64>,
    pub lap_r: Vec<f64>,
    pub hessian: Vec<[f64; 3]>,
    pub ell: Vec<[f64; 3]>,
    pub g: Vec<[f64; 2]>,
    pub div_omega: Vec<f64>,
    pub q: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
}

pub fn sample_geometry(
    model: &ManifoldModel,
    end: usize,
    n_r: usize,
    n_theta: usize,
) -> Result<GeometricSamples> {
    if n_r < 2 || n_theta < 1 {
        return Err(Error::Config(
            "sample_geometry needs n_r >= 2 and n_theta >= 1".into(),
        ));
    }
    let ev = EndEvaluator::new(model, end)?;
    let (r0, rm) = (ev.r0(), ev.r_max());
    let thetas = ev.theta_samples(n_theta);
    let mut s = GeometricSamples {
        points: vec![],
        dr2: vec![],
        lap_r: vec![],
        hessian: vec![],
        ell: vec![],
        g: vec![],
        div_omega: vec![],
        q: vec![],
        q1: vec![],
        q2: vec![],
    };
    for i in 0..n_r {
        let r = r0 * (rm / r0).powf(i as f64 / (n_r - 1) as f64);
        let r = r.min(rm);
        for &t in &thetas {
            let m = ev.metric(r, t)?;
            let p = ev.potential(r, t)?;
            s.points.push((r, t));
            s.dr2.push(m.dr2);
            s.lap_r.push(m.lap_r);
            s.hessian.push(m.hessian);
            s.ell.push(m.ell());
            s.g.push(m.g);
            s.div_omega.push(m.div_omega);
            s.q.push(p.q);
            s.q1.push(p.q1);
            s.q2.push(p.q2);
        }
    }
    Ok(s)
}

/// Largest `|q - V - L|` over log-spaced radii and angles of a single warped
/// end, where `L = (d-1)/4 f''/f + (d-1)(d-3)/8 (f'/f)^2` is the Liouville
/// potential of the half-density transform written from the profile alone.
pub fn liouville_identity_defect(model: &ManifoldModel, n_r: usize, n_theta: usize) -> Result<f64> {
    let end = match model.ends.as_slice() {
        [e] if model.coupling == super::Coupling::SingleEndDirichlet => e,
        _ => {
            return Err(Error::NonSeparable(
                "the Liouville identity is checked on single warped ends".into(),
            ))
        }
    };
    let ChartKind::Warped { d, f, .. } = &end.kind else {
        return Err(Error::NonSeparable(
            "the Liouville identity needs a warped end".into(),
        ));
    };
    if n_r < 2 || n_theta < 1 {
        return Err(Error::Config(
            "liouville_identity_defect needs n_r >= 2 and n_theta >= 1".into(),
        ));
    }
    let ev = EndEvaluator::new(model, 0)?;
    let k = (*d - 1) as f64;
    let (lo, hi) = (ev.r0(), ev.r_max());
    let mut worst = 0.0f64;
    for i in 0..n_r {
        let r = (lo * (hi / lo).powf(i as f64 / (n_r - 1) as f64)).clamp(lo, hi);
        let w = f.derivs(r);
        let liouville = 0.25 * k * w.d2 + 0.125 * k * (k - 2.0) * w.d1 * w.d1;
        for &theta in &ev.theta_samples(n_theta) {
            let q = ev.potential(r, theta)?.q;
            worst = worst.max((q - model.potential.value(r, r, theta) - liouville).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngularSpace, EndChart, ParabolicPoint, Potential, WarpProfile};

    fn warped(f: WarpProfile) -> ManifoldModel {
        ManifoldModel::single(
            EndChart::warped(2, f, AngularSpace::Circle, 1.0, 256.0),
            Potential::Zero,
        )
    }

    #[test]
    fn cone_metric_at_two() {
        let m = eval_metric(&warped(WarpProfile::linear(1.0)), 0, (2.0, 0.0)).unwrap();
        assert_eq!(m.dr2, 1.0);
        assert!((m.lap_r - 0.5).abs() < 1e-15);
        assert!((m.hessian[2] - 2.0).abs() < 1e-14);
        assert_eq!(m.hessian[0], 0.0);
        // Christoffel symbols against differences of g_thth = r^2
        let gtt = |r: f64| r * r;
        let dg = d1(gtt, 2.0, 1e-3);
        assert!((m.christoffel[0][1][1] + 0.5 * dg).abs() < 1e-10);
        assert!((m.christoffel[1][0][1] - 0.5 * dg / gtt(2.0)).abs() < 1e-10);
    }

    #[test]
    fn cylinder_has_no_hessian() {
        let m = eval_metric(&warped(WarpProfile::constant(1.0)), 0, (7.0, 1.0)).unwrap();
        assert_eq!(m.lap_r, 0.0);
        assert_eq!(m.hessian, [0.0; 3]);
        let p = effective_potential(&warped(WarpProfile::constant(1.0)), 0, (7.0, 1.0)).unwrap();
        assert_eq!(p.q, 0.0);
    }

    #[test]
    fn warped_potentials() {
        let p = effective_potential(&warped(WarpProfile::linear(1.0)), 0, (2.0, 0.3)).unwrap();
        assert!((p.q + 1.0 / 32.0).abs() < 1e-15);
        assert_eq!(p.q1, p.q);
        let h = effective_potential(&warped(WarpProfile::exponential()), 0, (9.0, 0.3)).unwrap();
        assert!((h.q - 0.125).abs() < 1e-15);
    }

    #[test]
    fn outside_domain_is_an_error() {
        let m = warped(WarpProfile::linear(1.0));
        assert!(matches!(
            eval_metric(&m, 0, (0.1, 0.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            eval_metric(&m, 0, (300.0, 0.0)),
            Err(Error::Domain(_))
        ));
        let p = ManifoldModel::parabolic(0.5, 8.0, 512.0);
        assert!(matches!(
            eval_metric(&p, 0, (20.0, 1.0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn parabolic_metric_against_flat_plane() {
        let model = ManifoldModel::parabolic(0.4, 8.0, 512.0);
        let chart = ParabolicChart::new(0.4);
        for &(r, t) in &[(10.0, 0.0), (30.0, 0.6), (200.0, -0.9)] {
            let m = eval_metric(&model, 0, (r, t)).unwrap();
            let pt = chart.to_cartesian(r, t);
            assert!((m.lap_r - chart.laplacian_r(pt)).abs() < 1e-12);
            // Delta r from the chart divergence formula
            let nr = |s: f64| chart.n_r(s, t);
            let nt = |s: f64| chart.n_theta(s, t);
            let h = 1e-4 * r;
            let lap = d1(nr, r, h) - 0.5 * nr(r) * (d1(|s| (nr(s) * nt(s)).ln(), r, h));
            assert!((lap - m.lap_r).abs() < 1e-8 * m.lap_r.abs().max(1.0 / r));
            // div of the normalized field in Cartesian coordinates
            let div = chart.div_flow(ParabolicPoint { x: pt.x, y: pt.y });
            assert!((div - m.div_omega).abs() < 1e-8 / r);
            let parab = m.parabolic.unwrap();
            assert!(parab.n_r <= 1.0 && parab.n_r > 0.0);
        }
        let m0 = eval_metric(&model, 0, (40.0, 0.0)).unwrap();
        assert_eq!(m0.parabolic.unwrap().n_r, 1.0);
    }

    #[test]
    fn samples_respect_ell_bounds_and_divergence_identity() {
        for f in [
            WarpProfile::linear(1.0),
            WarpProfile::exponential(),
            WarpProfile::constant(2.0),
        ] {
            let s = sample_geometry(&warped(f), 0, 20, 4).unwrap();
            for i in 0..s.points.len() {
                assert!((s.div_omega[i] - s.lap_r[i]).abs() < 1e-10);
                assert!(s.ell[i][2] >= 0.0 && s.ell[i][2] <= s.g[i][1]);
            }
        }
        let s = sample_geometry(&ManifoldModel::parabolic(0.5, 8.0, 512.0), 0, 12, 9).unwrap();
        for i in 0..s.points.len() {
            assert!(s.ell[i][2] > 0.0 && s.ell[i][2] <= s.g[i][1]);
            assert_eq!(s.q1[i], 0.0);
        }
    }

    #[test]
    fn glued_surface_has_shrinking_gradient_near_neck() {
        let m = ManifoldModel::two_ended_surface(AngularSpace::Circle, 64.0, Potential::Zero);
        let d = eval_metric(&m, 1, (4.0, 0.0)).unwrap();
        assert!((d.dr2 - 15.0 / 16.0).abs() < 1e-14);
        let d0 = eval_metric(&m, 0, (4.0, 0.0)).unwrap();
        assert!((d0.lap_r - d.lap_r).abs() < 1e-14);
    }
}
