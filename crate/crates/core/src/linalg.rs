//! Complex banded LU with partial pivoting, plus thin wrappers over nalgebra
//! for the dense symmetric eigenproblems and singular values.

use crate::{Error, Result, C64};
use nalgebra::{DMatrix, SymmetricEigen};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, row-major.
#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![C64::new(0.0, 0.0); n * (kl + ku + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if j + self.kl < i || j > i + self.ku {
            C64::new(0.0, 0.0)
        } else {
            self.data[self.idx(i, j)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut acc = C64::new(0.0, 0.0);
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                acc += self.data[self.idx(i, j)] * xj;
            }
            *yi = acc;
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }
}

/// LU factors of a band matrix (row interchanges widen the upper band to
/// `kl + ku`).
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    w: usize,
    data: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.ku;
        let w = 2 * kl + ku + 1;
        let mut data = vec![C64::new(0.0, 0.0); n * w];
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let hi = (i + ku).min(n - 1);
            for j in lo..=hi {
                data[at(i, j)] = a.get(i, j);
            }
        }
        let scale = a.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let tiny = scale * 1e-300_f64.max(f64::EPSILON * 1e-6);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = data[at(k, k)].norm();
            for i in k + 1..=last_row {
                let v = data[at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best <= tiny || !best.is_finite() {
                return Err(Error::Singular(format!(
                    "zero pivot in column {k} of a {n}x{n} band system"
                )));
            }
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    data.swap(at(k, j), at(p, j));
                }
            }
            let pivot = data[at(k, k)];
            for i in k + 1..=last_row {
                let l = data[at(i, k)] / pivot;
                data[at(i, k)] = l;
                if l.re != 0.0 || l.im != 0.0 {
                    for j in k + 1..=last_col {
                        let ukj = data[at(k, j)];
                        data[at(i, j)] -= l * ukj;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            w,
            data,
            piv,
        })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        let w = self.w;
        let at = |i: usize, j: usize| i * w + (j + kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk.re != 0.0 || bk.im != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.data[at(i, k)] * bk;
                }
            }
        }
        let ubw = w - kl - 1;
        for i in (0..n).rev() {
            let mut acc = b[i];
            for j in i + 1..=(i + ubw).min(n - 1) {
                acc -= self.data[at(i, j)] * b[j];
            }
            b[i] = acc / self.data[at(i, i)];
        }
    }
}

/// Solves `A x = b` with one step of iterative refinement.
pub fn band_solve(a: &BandMatrix, b: &[C64]) -> Result<Vec<C64>> {
    if b.len() != a.n {
        return Err(Error::Shape(format!(
            "right-hand side has {} entries, matrix is {}",
            b.len(),
            a.n
        )));
    }
    let lu = BandLu::factor(a)?;
    let mut x = b.to_vec();
    lu.solve_in_place(&mut x);
    let ax = a.matvec(&x);
    let mut r: Vec<C64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
    lu.solve_in_place(&mut r);
    for (xi, ri) in x.iter_mut().zip(&r) {
        *xi += ri;
    }
    Ok(x)
}

/// Eigenpairs of a real symmetric tridiagonal matrix, ascending.
pub fn symmetric_tridiagonal_eigen(diag: &[f64], off: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = diag.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            off[i]
        } else if j + 1 == i {
            off[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| {
        eig.eigenvalues[*a]
            .partial_cmp(&eig.eigenvalues[*b])
            .unwrap()
    });
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    (vals, vecs)
}

/// Singular values of a complex matrix given row-major, descending.
pub fn singular_values(rows: usize, cols: usize, entries: &[C64]) -> Vec<f64> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_fn(rows, cols, |i, j| entries[i * cols + j]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_band(n: usize, kl: usize, ku: usize, seed: &[f64]) -> BandMatrix {
        let mut a = BandMatrix::zeros(n, kl, ku);
        let mut t = 0usize;
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let re = seed[t % seed.len()];
                let im = seed[(t * 7 + 3) % seed.len()];
                t += 1;
                a.set(i, j, C64::new(re, im));
            }
        }
        a
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 1, C64::new(1.0, 0.0));
        a.set(1, 0, C64::new(1.0, 0.0));
        a.set(1, 2, C64::new(2.0, 0.0));
        a.set(2, 1, C64::new(3.0, 0.0));
        a.set(2, 2, C64::new(1.0, 1.0));
        let b = vec![C64::new(1.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 1.0)];
        let x = band_solve(&a, &b).unwrap();
        let ax = a.matvec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).norm() < 1e-13);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(
            band_solve(&a, &[C64::new(1.0, 0.0); 4]),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn tridiagonal_eigen_matches_closed_form() {
        let n = 50;
        let (vals, vecs) = symmetric_tridiagonal_eigen(&vec![2.0; n], &vec![-1.0; n - 1]);
        for (k, v) in vals.iter().enumerate().take(5) {
            let th = (k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64;
            assert!((v - (2.0 - 2.0 * th.cos())).abs() < 1e-12);
        }
        let nrm: f64 = vecs[0].iter().map(|x| x * x).sum();
        assert!((nrm - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn band_solve_agrees_with_dense_lu(
            n in 3usize..30,
            kl in 0usize..4,
            ku in 0usize..4,
            seed in prop::collection::vec(-1.0f64..1.0, 16..40),
        ) {
            let mut a = random_band(n, kl, ku, &seed);
            for i in 0..n {
                a.add(i, i, C64::new(3.0 + (kl + ku) as f64, 0.5));
            }
            let b: Vec<C64> = (0..n).map(|i| C64::new((i as f64).sin(), (i as f64).cos())).collect();
            let x = band_solve(&a, &b).unwrap();
            let dense = a.to_dense();
            let xd = dense.lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
            for i in 0..n {
                prop_assert!((x[i] - xd[i]).norm() < 1e-10);
            }
        }
    }
}
