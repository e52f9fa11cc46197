use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};

const MAX_JITTER_STEPS: u32 = 12;

/// Gaussian random field with exponential covariance
/// `σ² exp(−‖x−y‖ / (2ℓ²))`, sampled exactly on a fixed point set.
#[derive(Debug, Clone)]
pub struct GrfSampler {
    mean: f64,
    sigma: f64,
    ell: f64,
    n_points: usize,
    factor: Option<Cholesky>,
}

impl GrfSampler {
    /// Factor the covariance on `points` (row-major, `dim` columns).
    ///
    /// Jitter `1e-10·σ²·10^i` is added to the diagonal until the
    /// Cholesky factorization succeeds.
    pub fn new(mean: f64, sigma: f64, ell: f64, points: &[f64], dim: usize) -> Result<Self> {
        if !(mean.is_finite() && sigma.is_finite() && sigma >= 0.0 && ell > 0.0) {
            return Err(Error::invalid("GRF needs finite mean, sigma >= 0 and ell > 0"));
        }
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::invalid("GRF point array is not a multiple of the dimension"));
        }
        let n = points.len() / dim;
        if sigma == 0.0 {
            return Ok(Self { mean, sigma, ell, n_points: n, factor: None });
        }
        let var = sigma * sigma;
        let denom = 2.0 * ell * ell;
        let cov = DenseMatrix::from_fn(n, n, |i, j| {
            let d2: f64 = (0..dim)
                .map(|a| (points[i * dim + a] - points[j * dim + a]).powi(2))
                .sum();
            var * (-d2.sqrt() / denom).exp()
        });
        let mut jitter = 0.0;
        for step in 0..=MAX_JITTER_STEPS {
            let mut c = cov.clone();
            for i in 0..n {
                c.as_mut_slice()[i * n + i] += jitter;
            }
            if let Ok(chol) = Cholesky::factor(&c) {
                return Ok(Self { mean, sigma, ell, n_points: n, factor: Some(chol) });
            }
            jitter = 1e-10 * var * 10f64.powi(step as i32);
        }
        Err(Error::NotPositiveDefinite { column: n })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let Some(chol) = &self.factor else {
            return vec![self.mean; self.n_points];
        };
        let z: Vec<f64> = (0..self.n_points).map(|_| rng.sample(StandardNormal)).collect();
        let mut x = chol.mul_lower(&z);
        x.iter_mut().for_each(|v| *v += self.mean);
        x
    }
}
