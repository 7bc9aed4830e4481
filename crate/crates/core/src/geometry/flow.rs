//! The normalized radial flow `dy/dt = eta grad r / |dr|^2`, integrated with
//! an adaptive Dormand-Prince 5(4) pair, and the push-forward check for
//! sphere tangent vectors.

use super::metric::EndEvaluator;
use super::phase::{critical_energy, r_lambda, EndPhase};
use super::{ManifoldModel, ParabolicChart, ParabolicPoint};
use crate::numerics::fit_power;
use crate::{Error, Result, C64};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct FlowOrbit {
    pub start: (f64, f64),
    pub t: Vec<f64>,
    /// Chart coordinates `(r, theta)` along the orbit.
    pub points: Vec<(f64, f64)>,
    /// `exp(int 1/2 div omega~ dt)`.
    pub weight: Vec<f64>,
    /// `int b~ dt`.
    pub phase: Vec<f64>,
    /// The orbit left the chart before reaching `t_end`.
    pub truncated: bool,
    /// `max |r(y(t)) - r(start) - t|` over the samples with `r >= r0`.
    pub affinity_defect: f64,
}

type State = [f64; 4];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy(y: &State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..4 {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Adaptive Dormand-Prince integration of the first two components; the
/// last two are quadratures carried along. Stops early (truncated) when
/// `inside` fails.
fn dopri5<F, G>(f: F, inside: G, y0: State, t_end: f64, tol: f64) -> (Vec<f64>, Vec<State>, bool)
where
    F: Fn(&State) -> State,
    G: Fn(&State) -> bool,
{
    let dir = t_end.signum();
    let mut t = 0.0;
    let mut y = y0;
    let mut ts = vec![0.0];
    let mut ys = vec![y0];
    let mut h = dir * (t_end.abs() / 100.0).max(1e-6);
    let mut k1 = f(&y);
    let mut steps = 0;
    while (t_end - t) * dir > 1e-14 * t_end.abs().max(1.0) {
        steps += 1;
        if steps > 100_000 {
            return (ts, ys, true);
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let k2 = f(&axpy(&y, &[(A21, &k1)], h));
        let k3 = f(&axpy(&y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(&axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(&axpy(
            &y,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            h,
        ));
        let y5in = axpy(
            &y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        );
        let k6 = f(&y5in);
        let yn = axpy(
            &y,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            h,
        );
        let k7 = f(&yn);
        let mut err: f64 = 0.0;
        for i in 0..4 {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol * (1.0 + y[i].abs().max(yn[i].abs()));
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            if !inside(&yn) {
                return (ts, ys, true);
            }
            t += h;
            y = yn;
            k1 = k7;
            ts.push(t);
            ys.push(y);
        }
        let fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= fac;
    }
    (ts, ys, false)
}

enum FlowChart {
    Line,
    Parabolic(ParabolicChart),
}

/// Integrates the normalized radial flow of end `end` from a chart point for
/// time `t_end` (negative for the backward flow), accumulating the
/// half-density weight and the phase `int b~` at energy `lambda`.
pub fn integrate_flow(
    model: &ManifoldModel,
    end: usize,
    start: (f64, f64),
    t_end: f64,
    tol: f64,
    lambda: f64,
) -> Result<FlowOrbit> {
    let ev = EndEvaluator::new(model, end)?;
    ev.metric(start.0, start.1)?;
    if !(tol > 0.0) {
        return Err(Error::Config("flow tolerance must be positive".into()));
    }
    let ce = critical_energy(model)?;
    let rl = r_lambda(model, lambda, ce.lambda0)?[end];
    let phase = EndPhase::with_r_lambda(EndEvaluator::new(model, end)?, C64::new(lambda, 0.0), rl);
    let chart = match model.parabolic_kappa() {
        Some(k) => FlowChart::Parabolic(ParabolicChart::new(k)),
        None => FlowChart::Line,
    };
    // backward orbits stop when they leave the end r >= r0
    let r_lo = if t_end < 0.0 { ev.r0() } else { 0.5 * ev.r0() };
    let r_hi = ev.r_max();
    let to_chart = |s: &State| -> (f64, f64) {
        match &chart {
            FlowChart::Line => (s[0], s[1]),
            FlowChart::Parabolic(c) => c.from_cartesian(ParabolicPoint { x: s[0], y: s[1] }),
        }
    };
    let inside = |s: &State| {
        let (r, t) = to_chart(s);
        let ok_r = r >= r_lo && r <= r_hi;
        match &chart {
            FlowChart::Line => ok_r,
            FlowChart::Parabolic(_) => ok_r && s[1] > 0.0 && t.abs() < 1.0,
        }
    };
    let rhs = |s: &State| -> State {
        let (r, t) = to_chart(s);
        let r = r.clamp(r_lo, r_hi);
        let (eta, deta) = ev.eta(r);
        let div = match &chart {
            FlowChart::Line => ev.metric(r, t).map(|m| m.div_omega).unwrap_or(0.0),
            FlowChart::Parabolic(c) => eta * c.div_flow(ParabolicPoint { x: s[0], y: s[1] }) + deta,
        };
        let bt = phase.b(r, t).1.re;
        match &chart {
            FlowChart::Line => [eta, 0.0, 0.5 * div, bt],
            FlowChart::Parabolic(c) => {
                let v = c.flow_field(ParabolicPoint { x: s[0], y: s[1] });
                [eta * v[0], eta * v[1], 0.5 * div, bt]
            }
        }
    };
    let y0 = match &chart {
        FlowChart::Line => [start.0, start.1, 0.0, 0.0],
        FlowChart::Parabolic(c) => {
            let p = c.to_cartesian(start.0, start.1);
            [p.x, p.y, 0.0, 0.0]
        }
    };
    let (ts, ys, truncated) = dopri5(rhs, inside, y0, t_end, tol);
    let points: Vec<(f64, f64)> = ys.iter().map(to_chart).collect();
    let mut defect: f64 = 0.0;
    for (t, p) in ts.iter().zip(&points) {
        if p.0 >= ev.r0() && start.0 >= ev.r0() {
            defect = defect.max((p.0 - start.0 - t).abs());
        }
    }
    Ok(FlowOrbit {
        start,
        t: ts,
        points,
        weight: ys.iter().map(|s| s[2].exp()).collect(),
        phase: ys.iter().map(|s| s[3]).collect(),
        truncated,
        affinity_defect: defect,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PushforwardReport {
    pub radius: f64,
    /// Largest fitted exponent `p` in `l(v_t, v_t) / l(v, v) ~ C ((R+t)/R)^p`.
    pub exponent: f64,
    /// Worst `l(v_t, v_t) / (l(v, v) ((R+t)/R)^exponent)` over the samples.
    pub c1: f64,
    /// `(theta, t, ratio)` samples.
    pub samples: Vec<(f64, f64, f64)>,
    /// Finite-difference spacing used for the Jacobian.
    pub spacing: f64,
}

/// Transports sphere tangent vectors at radius `radius` along the flow by
/// differencing neighbouring orbits, and fits the growth exponent of their
/// spherical norm.
pub fn pushforward_bound_check(
    model: &ManifoldModel,
    end: usize,
    radius: f64,
    times: &[f64],
    n_theta: usize,
) -> Result<PushforwardReport> {
    let ev = EndEvaluator::new(model, end)?;
    if ev.dimension() < 2 {
        return Err(Error::Refused(
            "one-dimensional ends have no sphere tangents".into(),
        ));
    }
    if times.len() < 2 || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Config(
            "need at least two positive flow times".into(),
        ));
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let lambda = critical_energy(model)?.lambda0 + 1.0;
    let chart = model.parabolic_kappa().map(ParabolicChart::new);
    let thetas: Vec<f64> = ev.theta_samples(n_theta.max(1));
    // squared norm of a chart displacement at a chart point
    let norm2 = |p: (f64, f64), dr: f64, dt: f64| -> Result<f64> {
        let m = ev.metric(p.0, p.1)?;
        Ok(m.g[0] * dr * dr + m.g[1] * dt * dt)
    };
    let at = |orbit: &FlowOrbit, t: f64| -> (f64, f64) {
        let i = orbit.t.partition_point(|s| *s < t).min(orbit.t.len() - 1);
        if i == 0 {
            return orbit.points[0];
        }
        let (t0, t1) = (orbit.t[i - 1], orbit.t[i]);
        let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let (a, b) = (orbit.points[i - 1], orbit.points[i]);
        (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
    };
    let transported = |theta: f64, delta: f64| -> Result<Vec<f64>> {
        let mut ratios = vec![];
        let flow = |th: f64| integrate_flow(model, end, (radius, th), t_max, 1e-11, lambda);
        let (op, om) = (flow(theta + delta)?, flow(theta - delta)?);
        if op.truncated || om.truncated {
            return Err(Error::Domain("neighbour orbit left the chart".into()));
        }
        let l0 = norm2((radius, theta), 0.0, 2.0 * delta)?;
        for &t in times {
            let (p, m) = (at(&op, t), at(&om, t));
            let mid = (0.5 * (p.0 + m.0), 0.5 * (p.1 + m.1));
            let lt = match &chart {
                // flat plane: use Cartesian displacements, then remove the
                // radial component to get the spherical part
                Some(c) => {
                    let (pp, pm) = (c.to_cartesian(p.0, p.1), c.to_cartesian(m.0, m.1));
                    let v = [pp.x - pm.x, pp.y - pm.y];
                    let q = c.to_cartesian(mid.0, mid.1);
                    let g = c.grad_r(q);
                    let gg = g[0] * g[0] + g[1] * g[1];
                    let proj = (v[0] * g[0] + v[1] * g[1]) / gg;
                    let w = [v[0] - proj * g[0], v[1] - proj * g[1]];
                    w[0] * w[0] + w[1] * w[1]
                }
                None => norm2(mid, 0.0, p.1 - m.1)?,
            };
            ratios.push(lt / l0);
        }
        Ok(ratios)
    };
    let mut samples = vec![];
    let mut exponent = f64::NEG_INFINITY;
    let mut spacing: f64 = 1e-3;
    for &theta in &thetas {
        let mut delta = 1e-3;
        let mut ratios = transported(theta, delta)?;
        let mut ok = false;
        for _ in 0..4 {
            let half = transported(theta, 0.5 * delta)?;
            let worst = ratios
                .iter()
                .zip(&half)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
                .fold(0.0, f64::max);
            ratios = half;
            delta *= 0.5;
            if worst < 1e-3 {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::NotConverged(format!(
                "neighbour orbits at theta = {theta} separate beyond linearization"
            )));
        }
        spacing = spacing.min(delta);
        let xs: Vec<f64> = times.iter().map(|t| (radius + t) / radius).collect();
        let fit = if ratios.iter().all(|r| (r - 1.0).abs() < 1e-9) {
            0.0
        } else {
            fit_power(&xs, &ratios).slope
        };
        exponent = exponent.max(fit);
        for (t, r) in times.iter().zip(&ratios) {
            samples.push((theta, *t, *r));
        }
    }
    let c1 = samples
        .iter()
        .map(|&(_, t, r)| r / ((radius + t) / radius).powf(exponent))
        .fold(0.0, f64::max);
    Ok(PushforwardReport {
        radius,
        exponent,
        c1,
        samples,
        spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngularSpace, EndChart, Potential, WarpProfile};

    fn cone() -> ManifoldModel {
        ManifoldModel::single(
            EndChart::warped(
                2,
                WarpProfile::linear(1.0),
                AngularSpace::Circle,
                1.0,
                256.0,
            ),
            Potential::Zero,
        )
    }

    #[test]
    fn warped_orbits_translate_in_r() {
        let o = integrate_flow(&cone(), 0, (3.0, 0.7), 20.0, 1e-10, 1.0).unwrap();
        let end = *o.points.last().unwrap();
        assert!((end.0 - 23.0).abs() < 1e-9 && end.1 == 0.7);
        assert!(!o.truncated);
        // half-density weight is sqrt(f(r + t) / f(r)) on the cone
        let w = *o.weight.last().unwrap();
        assert!((w - (23.0f64 / 3.0).sqrt()).abs() < 1e-8);
        let back = integrate_flow(&cone(), 0, (3.0, 0.7), -10.0, 1e-10, 1.0).unwrap();
        assert!(back.truncated);
    }

    #[test]
    fn parabolic_orbits_keep_theta_and_are_r_affine() {
        let m = ManifoldModel::parabolic(0.5, 8.0, 512.0);
        let axis = integrate_flow(&m, 0, (20.0, 0.0), 100.0, 1e-10, 1.0).unwrap();
        assert!(axis.points.iter().all(|p| p.1.abs() < 1e-12));
        let tol = 1e-9;
        let o = integrate_flow(&m, 0, (20.0, 0.6), 200.0, tol, 1.0).unwrap();
        assert!(
            o.affinity_defect <= 10.0 * tol * 220.0,
            "{}",
            o.affinity_defect
        );
        let fine = integrate_flow(&m, 0, (20.0, 0.6), 200.0, tol / 32.0, 1.0).unwrap();
        let (a, b) = (o.points.last().unwrap(), fine.points.last().unwrap());
        assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-8);
        assert!((a.1 - 0.6).abs() < 1e-8);
    }

    #[test]
    fn pushforward_exponents() {
        let times = [4.0, 16.0, 64.0, 128.0];
        let c = pushforward_bound_check(&cone(), 0, 16.0, &times, 3).unwrap();
        assert!((c.exponent - 2.0).abs() < 1e-6, "{}", c.exponent);
        let cyl = ManifoldModel::cylinder(1.0, 256.0);
        let z = pushforward_bound_check(&cyl, 0, 16.0, &times, 3).unwrap();
        assert!(z.exponent.abs() < 1e-6);
        let p = ManifoldModel::parabolic(0.5, 8.0, 512.0);
        let e = pushforward_bound_check(&p, 0, 32.0, &times, 5).unwrap();
        assert!(e.exponent > 0.8 && e.exponent < 1.1, "{}", e.exponent);
    }
}
