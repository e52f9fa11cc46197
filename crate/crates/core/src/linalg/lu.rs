use crate::error::{Error, Result};

use super::csr::CsrMatrix;
use super::dense::DenseMatrix;

/// Pivots smaller than this times the largest |entry| (scaled by n) are singular.
const PIVOT_RTOL: f64 = 1e-14;

/// Dense LU with partial pivoting, factored once and reused for many solves.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("DenseLu::factor", m.rows(), m.cols()));
        }
        let n = m.rows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let tol = PIVOT_RTOL * m.max_abs() * (n.max(1) as f64);
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tol || !pmax.is_finite() {
                return Err(Error::SingularPivot { column: k, pivot: pmax });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            let pivot_row: Vec<f64> = lu.row(k)[k + 1..].to_vec();
            for i in (k + 1)..n {
                let l = lu[(i, k)] / pivot;
                lu[(i, k)] = l;
                if l != 0.0 {
                    let row = &mut lu.row_mut(i)[k + 1..];
                    for (a, u) in row.iter_mut().zip(&pivot_row) {
                        *a -= l * u;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim("DenseLu::solve", self.n, b.len()));
        }
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(l, xj)| l * xj).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, xj)| u * xj).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}

/// Banded LU with partial pivoting for sparse matrices of small bandwidth.
///
/// Storage follows the usual band layout: row `i` keeps columns
/// `i - kl ..= i + kl + ku`, the extra `kl` super-diagonals holding pivoting fill.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::dim("BandedLu::factor", a.n_rows(), a.n_cols()));
        }
        let n = a.n_rows();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut f = Self { n, kl, ku, width, band: vec![0.0; n * width], piv: vec![0; n] };
        let mut amax: f64 = 0.0;
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (c, v) in cols.iter().zip(vals) {
                *f.at_mut(i, *c) = *v;
                amax = amax.max(v.abs());
            }
        }
        let tol = PIVOT_RTOL * amax * (n.max(1) as f64);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (p, pmax) = (k..=last)
                .map(|i| (i, f.at(i, k).abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tol || !pmax.is_finite() {
                return Err(Error::SingularPivot { column: k, pivot: pmax });
            }
            f.piv[k] = p;
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let tmp = f.at(k, j);
                    *f.at_mut(k, j) = f.at(p, j);
                    *f.at_mut(p, j) = tmp;
                }
            }
            let pivot = f.at(k, k);
            for i in (k + 1)..=last {
                let l = f.at(i, k) / pivot;
                *f.at_mut(i, k) = l;
                if l != 0.0 {
                    for j in (k + 1)..=jmax {
                        let u = f.at(k, j);
                        *f.at_mut(i, j) -= l * u;
                    }
                }
            }
        }
        Ok(f)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[self.offset(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.band[o]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::dim("BandedLu::solve", self.n, b.len()));
        }
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[i] -= self.at(i, k) * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let jmax = (i + self.kl + self.ku).min(n - 1);
            let mut s = x[i];
            for j in (i + 1)..=jmax {
                s -= self.at(i, j) * x[j];
            }
            x[i] = s / self.at(i, i);
        }
        Ok(x)
    }
}
