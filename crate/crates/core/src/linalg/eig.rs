use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::dense::DenseMatrix;
use super::vector::norm2;

/// Eigen-decomposition of a symmetric matrix: `values` ascending, matching
/// orthonormal eigenvectors stored as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi-rotation eigensolver for small dense symmetric matrices.
pub fn sym_eig(m: &DenseMatrix) -> Result<SymEig> {
    if !m.is_square() {
        return Err(Error::dim("sym_eig", m.rows(), m.cols()));
    }
    let asym = m.asymmetry();
    if asym > 1e-12 * m.max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows();
    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let scale = a.frobenius().powi(2);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s, t);
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    Ok(SymEig { values, vectors })
}

fn rotate(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.rows();
    let apq = a[(p, q)];
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let (akp, akq) = (a[(k, p)], a[(k, q)]);
        let new_p = c * akp - s * akq;
        let new_q = s * akp + c * akq;
        a[(k, p)] = new_p;
        a[(p, k)] = new_p;
        a[(k, q)] = new_q;
        a[(q, k)] = new_q;
    }
    a[(p, p)] -= t * apq;
    a[(q, q)] += t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
}

/// Power-iteration estimate of the dominant |eigenvalue| of a linear operator.
///
/// The start vector is drawn uniformly from [-1, 1]^n with the given seed, so
/// the estimate is reproducible. Returns ‖op(v)‖ for the last normalized iterate.
pub fn spectral_radius_estimate<F>(mut apply: F, n: usize, iters: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    if nv == 0.0 {
        return Ok(0.0);
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = apply(&v)?;
        if w.len() != n {
            return Err(Error::dim("spectral_radius_estimate", n, w.len()));
        }
        estimate = norm2(&w);
        if estimate == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / estimate).collect();
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn diagonal_input() {
        let e = sym_eig(&DenseMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn zero_matrix() {
        let e = sym_eig(&DenseMatrix::zeros(4, 4)).unwrap();
        assert!(e.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_nonsymmetric() {
        let m = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn laplacian_sine_spectrum() {
        let n = 9;
        let h = 1.0 / 10.0;
        let m = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0 / h,
            1 => -1.0 / h,
            _ => 0.0,
        });
        let e = sym_eig(&m).unwrap();
        for (j, lam) in e.values.iter().enumerate() {
            let exact = (2.0 / h) * (1.0 - ((j + 1) as f64 * PI * h).cos());
            assert!((lam - exact).abs() < 1e-9 * exact.abs().max(1.0), "{lam} vs {exact}");
        }
        let mv = m.matmul(&e.vectors).unwrap();
        let vl = e.vectors.matmul(&DenseMatrix::diag(&e.values)).unwrap();
        assert!(mv.sub(&vl).unwrap().frobenius() / m.frobenius() < 1e-9);
        let vtv = e.vectors.t_matmul(&e.vectors).unwrap();
        assert!(vtv.sub(&DenseMatrix::identity(n)).unwrap().frobenius() < 1e-10);
    }

    #[test]
    fn power_iteration_cases() {
        let half = spectral_radius_estimate(|v| Ok(v.iter().map(|x| 0.5 * x).collect()), 10, 5, 1)
            .unwrap();
        assert!((half - 0.5).abs() < 1e-8);
        let two =
            spectral_radius_estimate(|v| Ok(v.iter().map(|x| 2.0 * x).collect()), 10, 3, 1).unwrap();
        assert!((two - 2.0).abs() < 1e-12);
        let d: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
        let dense_rho = sym_eig(&DenseMatrix::diag(&d)).unwrap().values[8];
        let est = spectral_radius_estimate(
            |v| Ok(v.iter().zip(&d).map(|(x, s)| x * s).collect()),
            9,
            200,
            3,
        )
        .unwrap();
        assert!((est - dense_rho).abs() < 1e-8, "{est}");
        assert!(spectral_radius_estimate(|v| Ok(v.to_vec()), 3, 0, 0).is_err());
    }
}
