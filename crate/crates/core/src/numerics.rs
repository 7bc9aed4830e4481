//! Small numerical helpers shared by the modules: cutoffs, finite differences,
//! quadrature, regressions and window averages.

use crate::C64;

/// Smooth step equal to 1 on `(-inf, 1]`, 0 on `[2, inf)`, quintic in between.
pub fn chi(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

/// Derivative of [`chi`].
pub fn chi_prime(t: f64) -> f64 {
    if t <= 1.0 || t >= 2.0 {
        0.0
    } else {
        let s = t - 1.0;
        -30.0 * s * s * (1.0 - s) * (1.0 - s)
    }
}

/// Outer cutoff `1 - chi(r / R)`: zero below `R`, one above `2R`.
pub fn chi_bar(r: f64, big_r: f64) -> f64 {
    1.0 - chi(r / big_r)
}

/// Fourth-order central first derivative.
pub fn d1<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn d2<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h))
        / (12.0 * h * h)
}

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Three-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss3<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    (0..3).map(|i| GL3_W[i] * f(c + h * GL3_X[i])).sum::<f64>() * h
}

/// Adaptive Simpson integration, used for oracles and phase integrals off-grid.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Ordinary least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if syy > 0.0 && sxx > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    }
}

/// Fits `y ~ C x^p` on positive data and returns `p` with the fit quality.
pub fn fit_power(x: &[f64], y: &[f64]) -> LineFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Average `R^{-1} \int_R^{2R} v(r) dr` (any window `[lo, hi]`) of samples on
/// an increasing abscissa, by the trapezoid rule with linear interpolation at
/// the window ends. Returns `None` if the window is not covered.
pub fn window_average(r: &[f64], v: &[C64], lo: f64, hi: f64) -> Option<C64> {
    if r.len() < 2 || lo < r[0] || hi > r[r.len() - 1] || hi <= lo {
        return None;
    }
    let interp = |t: f64| -> C64 {
        let i = match r.binary_search_by(|p| p.partial_cmp(&t).unwrap()) {
            Ok(i) => return v[i],
            Err(i) => i,
        };
        let (a, b) = (i - 1, i);
        let s = (t - r[a]) / (r[b] - r[a]);
        v[a] * (1.0 - s) + v[b] * s
    };
    let mut pts: Vec<(f64, C64)> = vec![(lo, interp(lo))];
    for (ri, vi) in r.iter().zip(v) {
        if *ri > lo && *ri < hi {
            pts.push((*ri, *vi));
        }
    }
    pts.push((hi, interp(hi)));
    let mut acc = C64::new(0.0, 0.0);
    for w in pts.windows(2) {
        acc += (w[0].1 + w[1].1) * (0.5 * (w[1].0 - w[0].0));
    }
    Some(acc / (hi - lo))
}

/// Aitken extrapolation of a converging sequence from its last three terms.
/// Falls back to the last term when the second difference degenerates.
pub fn aitken(s1: f64, s2: f64, s3: f64) -> f64 {
    let d2 = s3 - s2;
    let d1 = s2 - s1;
    let den = d2 - d1;
    let scale = s1.abs().max(s2.abs()).max(s3.abs()).max(f64::MIN_POSITIVE);
    if den.abs() <= 1e-14 * scale || d1 * d2 <= 0.0 {
        s3
    } else {
        s3 - d2 * d2 / den
    }
}

/// Unwraps a sequence of phases in `(-pi, pi]` into a continuous sequence.
pub fn unwrap_phase(p: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.len());
    let mut offset = 0.0;
    let tau = std::f64::consts::TAU;
    for (i, &v) in p.iter().enumerate() {
        if i > 0 {
            let prev = p[i - 1];
            let d = v - prev;
            if d > std::f64::consts::PI {
                offset -= tau;
            } else if d < -std::f64::consts::PI {
                offset += tau;
            }
        }
        out.push(v + offset);
    }
    out
}

/// Principal square root with the branch cut on the negative real axis
/// (positive real part off the cut).
pub fn csqrt(z: C64) -> C64 {
    z.sqrt()
}
