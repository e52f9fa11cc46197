use crate::error::{Error, Result};

use super::csr::CsrMatrix;
use super::dense::DenseMatrix;

/// Lower-triangular Cholesky factor, M = L Lᵀ.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim("Cholesky::factor", m.rows(), m.cols()));
        }
        let n = m.rows();
        let mut l = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = l.row(i)[..j].iter().zip(&l.row(j)[..j]).map(|(a, b)| a * b).sum();
                let v = m[(i, j)] - s;
                if i == j {
                    if v <= 0.0 || !v.is_finite() {
                        return Err(Error::NotPositiveDefinite { column: i });
                    }
                    l[(i, i)] = v.sqrt();
                } else {
                    l[(i, j)] = v / l[(j, j)];
                }
            }
        }
        Ok(Self { l })
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// L z
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        (0..n).map(|i| self.l.row(i)[..=i].iter().zip(&z[..=i]).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.rows();
        if b.len() != n {
            return Err(Error::dim("Cholesky::solve", n, b.len()));
        }
        let mut y = b.to_vec();
        for i in 0..n {
            let s: f64 = self.l.row(i)[..i].iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        Ok(y)
    }
}

/// Whether a symmetric sparse matrix is positive definite, decided by a
/// banded Cholesky sweep restricted to the lower profile of `a`.
///
/// Only the lower triangle is read; callers check symmetry separately.
pub fn is_positive_definite(a: &CsrMatrix) -> bool {
    let n = a.n_rows();
    if n != a.n_cols() {
        return false;
    }
    let (kl, _) = a.bandwidth();
    let w = kl + 1;
    // row i holds L(i, i-kl..=i) at offsets 0..=kl
    let mut l = vec![0.0; n * w];
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                l[i * w + (j + kl - i)] = v;
            }
        }
    }
    for i in 0..n {
        let j0 = i.saturating_sub(kl);
        for j in j0..=i {
            let k0 = j0.max(j.saturating_sub(kl));
            let mut s = l[i * w + (j + kl - i)];
            for k in k0..j {
                s -= l[i * w + (k + kl - i)] * l[j * w + (k + kl - j)];
            }
            if i == j {
                if !(s > 0.0 && s.is_finite()) {
                    return false;
                }
                l[i * w + kl] = s.sqrt();
            } else {
                l[i * w + (j + kl - i)] = s / l[j * w + kl];
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_and_solve_spd() {
        let m = DenseMatrix::from_row_major(2, 2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let c = Cholesky::factor(&m).unwrap();
        let x = c.solve(&[2.0, 1.0]).unwrap();
        let back = m.matvec(&x).unwrap();
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
        assert!(Cholesky::factor(&DenseMatrix::diag(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn banded_definiteness_check() {
        let lap = |shift: f64| {
            let n = 12;
            let d = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
                0 => 2.0 - shift,
                1 => -1.0,
                _ => 0.0,
            });
            CsrMatrix::from_dense(&d, 0.0)
        };
        assert!(is_positive_definite(&lap(0.0)));
        assert!(!is_positive_definite(&lap(0.5)));
        let dense = lap(0.05).to_dense();
        assert_eq!(is_positive_definite(&lap(0.05)), Cholesky::factor(&dense).is_ok());
    }
}
