//! The parabolic end: the half plane `y > 0` in coordinates
//! `r^2 = kappa x^2 + y^2`, `theta = x y^{-kappa}`, restricted to
//! `|theta| < 1`.
//!
//! In `(r, theta)` the inverse metric is `diag(N_r, N_theta)`, and
//! `|g|^{1/4} Delta |g|^{-1/4} = d_r N_r d_r + d_theta N_theta d_theta + W_r + W_theta`.

use crate::numerics::d1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicChart {
    pub kappa: f64,
}

/// Cartesian position of a chart point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParabolicPoint {
    pub x: f64,
    pub y: f64,
}

impl ParabolicChart {
    pub fn new(kappa: f64) -> Self {
        ParabolicChart { kappa }
    }

    /// Solves `y^2 + kappa theta^2 y^{2 kappa} = r^2` for `y > 0`.
    pub fn y_of(&self, r: f64, theta: f64) -> f64 {
        let k = self.kappa;
        let c = k * theta * theta;
        let g = |y: f64| y * y + c * y.powf(2.0 * k) - r * r;
        let (mut lo, mut hi) = (0.0, r);
        let mut y = r / (1.0 + c).sqrt().max(1.0);
        for _ in 0..200 {
            let gy = g(y);
            if gy > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let dg = 2.0 * y + 2.0 * k * c * y.powf(2.0 * k - 1.0);
            let mut next = y - gy / dg;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - y).abs() <= 1e-16 * r {
                return next;
            }
            y = next;
        }
        y
    }

    pub fn to_cartesian(&self, r: f64, theta: f64) -> ParabolicPoint {
        let y = self.y_of(r, theta);
        ParabolicPoint {
            x: theta * y.powf(self.kappa),
            y,
        }
    }

    pub fn from_cartesian(&self, p: ParabolicPoint) -> (f64, f64) {
        let r = (self.kappa * p.x * p.x + p.y * p.y).sqrt();
        (r, p.x * p.y.powf(-self.kappa))
    }

    pub fn n_r(&self, r: f64, theta: f64) -> f64 {
        let k = self.kappa;
        let y = self.y_of(r, theta);
        1.0 - (k - k * k) * theta * theta * y.powf(2.0 * k) / (r * r)
    }

    pub fn n_theta(&self, r: f64, theta: f64) -> f64 {
        let k = self.kappa;
        let y = self.y_of(r, theta);
        y.powf(-2.0 * k) + k * k * theta * theta / (y * y)
    }

    /// `|dr|^2` computed from the Cartesian gradient of `r`.
    pub fn dr2_cartesian(&self, p: ParabolicPoint) -> f64 {
        let k = self.kappa;
        let r2 = k * p.x * p.x + p.y * p.y;
        (k * k * p.x * p.x + p.y * p.y) / r2
    }

    /// `|d theta|^2` computed from the Cartesian gradient of `theta`.
    pub fn dtheta2_cartesian(&self, p: ParabolicPoint) -> f64 {
        let k = self.kappa;
        let a = p.y.powf(-k);
        let b = -k * p.x * p.y.powf(-k - 1.0);
        a * a + b * b
    }

    /// `ln |g| = -ln N_r - ln N_theta`.
    pub fn ln_g(&self, r: f64, theta: f64) -> f64 {
        -self.n_r(r, theta).ln() - self.n_theta(r, theta).ln()
    }

    fn hr(r: f64) -> f64 {
        4e-3 * r
    }

    const HT: f64 = 2e-3;

    pub fn dn_r_dr(&self, r: f64, theta: f64) -> f64 {
        d1(|t| self.n_r(t, theta), r, Self::hr(r))
    }

    /// `W_r = -N_r (d_r ln|g|)^2 / 16 - d_r(N_r d_r ln|g|) / 4`.
    pub fn w_r(&self, r: f64, theta: f64) -> f64 {
        let h = Self::hr(r);
        let lr = |t: f64| d1(|s| self.ln_g(s, theta), t, h);
        let g = |t: f64| self.n_r(t, theta) * lr(t);
        let l1 = lr(r);
        -self.n_r(r, theta) * l1 * l1 / 16.0 - d1(g, r, h) / 4.0
    }

    /// `W_theta`, the analogue of [`Self::w_r`] in `theta`.
    pub fn w_theta(&self, r: f64, theta: f64) -> f64 {
        let h = Self::HT;
        let lt = |t: f64| d1(|s| self.ln_g(r, s), t, h);
        let g = |t: f64| self.n_theta(r, t) * lt(t);
        let l1 = lt(theta);
        -self.n_theta(r, theta) * l1 * l1 / 16.0 - d1(g, theta, h) / 4.0
    }

    /// Cartesian gradient of `r`.
    pub fn grad_r(&self, p: ParabolicPoint) -> [f64; 2] {
        let k = self.kappa;
        let r = (k * p.x * p.x + p.y * p.y).sqrt();
        [k * p.x / r, p.y / r]
    }

    /// Cartesian Hessian `[xx, xy, yy]` of `r`.
    pub fn hessian_r(&self, p: ParabolicPoint) -> [f64; 3] {
        let k = self.kappa;
        let r = (k * p.x * p.x + p.y * p.y).sqrt();
        let r3 = r * r * r;
        [
            k / r - k * k * p.x * p.x / r3,
            -k * p.x * p.y / r3,
            1.0 / r - p.y * p.y / r3,
        ]
    }

    pub fn laplacian_r(&self, p: ParabolicPoint) -> f64 {
        let h = self.hessian_r(p);
        h[0] + h[2]
    }

    /// Normalized gradient field `grad r / |dr|^2`.
    pub fn flow_field(&self, p: ParabolicPoint) -> [f64; 2] {
        let k = self.kappa;
        let r = (k * p.x * p.x + p.y * p.y).sqrt();
        let d = k * k * p.x * p.x + p.y * p.y;
        [r * k * p.x / d, r * p.y / d]
    }

    /// Divergence of [`Self::flow_field`].
    pub fn div_flow(&self, p: ParabolicPoint) -> f64 {
        let k = self.kappa;
        let r = (k * p.x * p.x + p.y * p.y).sqrt();
        let d = k * k * p.x * p.x + p.y * p.y;
        1.0 / r + r * (1.0 + k) / d - 2.0 * r * (k * k * k * p.x * p.x + p.y * p.y) / (d * d)
    }

    /// Unit vector tangent to the level set of `r`.
    pub fn sphere_tangent(&self, p: ParabolicPoint) -> [f64; 2] {
        let g = self.grad_r(p);
        let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
        [g[1] / n, -g[0] / n]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_formulas_match_cartesian_gradients() {
        for &k in &[0.3, 0.5, 0.7] {
            let c = ParabolicChart::new(k);
            for &r in &[8.0, 30.0, 500.0] {
                for &t in &[-0.9, -0.3, 0.0, 0.4, 0.99] {
                    let p = c.to_cartesian(r, t);
                    let (rr, tt) = c.from_cartesian(p);
                    assert!((rr - r).abs() < 1e-12 * r);
                    assert!((tt - t).abs() < 1e-12);
                    assert!((c.n_r(r, t) - c.dr2_cartesian(p)).abs() < 1e-12);
                    let nt = c.n_theta(r, t);
                    assert!((nt - c.dtheta2_cartesian(p)).abs() < 1e-12 * nt);
                }
            }
            assert_eq!(c.n_r(17.0, 0.0), 1.0);
        }
    }

    #[test]
    fn divergence_matches_finite_differences() {
        let c = ParabolicChart::new(0.5);
        let p = ParabolicPoint { x: 3.0, y: 11.0 };
        let h = 1e-4;
        let fx = |x: f64| c.flow_field(ParabolicPoint { x, y: p.y })[0];
        let fy = |y: f64| c.flow_field(ParabolicPoint { x: p.x, y })[1];
        let div = d1(fx, p.x, h) + d1(fy, p.y, h);
        assert!((div - c.div_flow(p)).abs() < 1e-9);
    }

    #[test]
    fn conjugated_potentials_decay_like_inverse_square() {
        let c = ParabolicChart::new(0.5);
        let w1 = (c.w_r(100.0, 0.5) + c.w_theta(100.0, 0.5)).abs();
        let w2 = (c.w_r(400.0, 0.5) + c.w_theta(400.0, 0.5)).abs();
        let rate = (w1 / w2).ln() / 4f64.ln();
        assert!(rate > 1.8, "rate {rate}");
    }
}
