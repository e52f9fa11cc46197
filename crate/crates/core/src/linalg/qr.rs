use super::dense::DenseMatrix;

/// Thin QR factors: `q` is m×n with orthonormal columns, `r` is n×n upper
/// triangular with a nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct ThinQr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder thin QR of an m×n matrix with m ≥ n.
///
/// Rank deficiency is not an error: it shows up as a (near) zero `r[(j, j)]`
/// and the corresponding column of `q` is still a unit vector orthogonal to
/// the others.
///
/// # Panics
/// If `m.rows() < m.cols()`.
pub fn qr_thin(m: &DenseMatrix) -> ThinQr {
    let (rows, cols) = (m.rows(), m.cols());
    assert!(rows >= cols, "qr_thin needs rows >= cols ({rows} < {cols})");
    let mut a = m.clone();
    // Householder vectors, v_k has support k..rows
    let mut reflectors: Vec<Vec<f64>> = Vec::with_capacity(cols);

    for k in 0..cols {
        let norm = (k..rows).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        let mut v: Vec<f64> = (k..rows).map(|i| a[(i, k)]).collect();
        if norm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            reflectors.push(Vec::new());
            continue;
        }
        for x in v.iter_mut() {
            *x /= vnorm;
        }
        apply_reflector(&mut a, &v, k, k);
        // exact values below the diagonal
        a[(k, k)] = alpha;
        for i in (k + 1)..rows {
            a[(i, k)] = 0.0;
        }
        reflectors.push(v);
    }

    let mut r = DenseMatrix::from_fn(cols, cols, |i, j| if j >= i { a[(i, j)] } else { 0.0 });
    let mut q = DenseMatrix::from_fn(rows, cols, |i, j| if i == j { 1.0 } else { 0.0 });
    for k in (0..cols).rev() {
        if !reflectors[k].is_empty() {
            apply_reflector(&mut q, &reflectors[k], k, k);
        }
    }
    for k in 0..cols {
        if r[(k, k)] < 0.0 {
            for j in k..cols {
                r[(k, j)] = -r[(k, j)];
            }
            for i in 0..rows {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    ThinQr { q, r }
}

/// Applies (I - 2 v vᵀ) to rows `row0..` and columns `col0..` of `a`.
fn apply_reflector(a: &mut DenseMatrix, v: &[f64], row0: usize, col0: usize) {
    let cols = a.cols();
    let mut w = vec![0.0; cols - col0];
    for (t, vi) in v.iter().enumerate() {
        let row = &a.row(row0 + t)[col0..];
        for (wj, aij) in w.iter_mut().zip(row) {
            *wj += vi * aij;
        }
    }
    for (t, vi) in v.iter().enumerate() {
        let row = &mut a.row_mut(row0 + t)[col0..];
        for (aij, wj) in row.iter_mut().zip(&w) {
            *aij -= 2.0 * vi * wj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthogonality_defect(q: &DenseMatrix) -> f64 {
        q.t_matmul(q).unwrap().sub(&DenseMatrix::identity(q.cols())).unwrap().frobenius()
    }

    #[test]
    fn identity_factorizes_trivially() {
        let f = qr_thin(&DenseMatrix::identity(4));
        assert!(f.q.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-15);
        assert!(f.r.sub(&DenseMatrix::identity(4)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn random_tall_matrix_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = DenseMatrix::from_fn(20, 5, |_, _| rng.random_range(-1.0..1.0));
        let f = qr_thin(&m);
        assert!(orthogonality_defect(&f.q) < 1e-12);
        let back = f.q.matmul(&f.r).unwrap();
        assert!(back.sub(&m).unwrap().frobenius() / m.frobenius() < 1e-12);
        for i in 0..5 {
            assert!(f.r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn duplicated_column_shows_small_pivot() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = DenseMatrix::from_fn(10, 4, |_, _| rng.random_range(-1.0..1.0));
        let c = m.column(1);
        m.set_column(3, &c);
        let f = qr_thin(&m);
        let smallest = (0..4).map(|j| f.r[(j, j)]).fold(f64::INFINITY, f64::min);
        assert!(smallest < 1e-12, "smallest pivot {smallest}");
        assert!(orthogonality_defect(&f.q) < 1e-12);
    }

    #[test]
    fn zero_column_is_tolerated() {
        let m = DenseMatrix::from_fn(5, 2, |i, j| if j == 0 { 0.0 } else { i as f64 });
        let f = qr_thin(&m);
        assert_eq!(f.r[(0, 0)], 0.0);
        assert!(orthogonality_defect(&f.q) < 1e-12);
        assert!(f.q.matmul(&f.r).unwrap().sub(&m).unwrap().max_abs() < 1e-12);
    }
}
