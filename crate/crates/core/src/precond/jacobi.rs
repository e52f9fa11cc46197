use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

use super::{check_len, is_symmetric, Preconditioner};

/// Damped Jacobi as `ν` Richardson sweeps `z ← z + γ D⁻¹ (r − A z)` from `z = 0`.
#[derive(Debug, Clone)]
pub struct Jacobi {
    a: Arc<CsrMatrix>,
    diag: Vec<f64>,
    gamma: f64,
    steps: usize,
    spd: bool,
}

impl Jacobi {
    pub fn new(a: Arc<CsrMatrix>, gamma: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("Jacobi needs at least one sweep"));
        }
        if !gamma.is_finite() {
            return Err(Error::invalid("Jacobi damping must be finite"));
        }
        let diag = a.diagonal();
        if let Some(i) = diag.iter().position(|&d| d == 0.0 || !d.is_finite()) {
            return Err(Error::invalid(format!("zero diagonal entry at row {i}")));
        }
        let positive_diag = diag.iter().all(|&d| d > 0.0);
        // A single sweep is γD⁻¹. More sweeps give a symmetric polynomial in
        // D⁻¹A times D⁻¹, positive in the usual smoother regime γρ(D⁻¹A) < 2.
        let spd = positive_diag && gamma > 0.0 && (steps == 1 || is_symmetric(&a));
        Ok(Self { a, diag, gamma, steps, spd })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("Jacobi::apply", self.diag.len(), r)?;
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, d)| self.gamma * (ri / d)).collect();
        let mut az = vec![0.0; z.len()];
        for _ in 1..self.steps {
            self.a.spmv_into(&z, &mut az)?;
            for i in 0..z.len() {
                z[i] += self.gamma * ((r[i] - az[i]) / self.diag[i]);
            }
        }
        Ok(z)
    }
    fn dim(&self) -> usize {
        self.diag.len()
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        self.spd
    }
    fn label(&self) -> String {
        format!("jacobi(nu={},gamma={})", self.steps, self.gamma)
    }
}

/// Level-dependent Helmholtz damping `(2 − k²h²) / (3 − k²h²)`.
pub fn jacobi_gamma_helmholtz(k_h: f64, h: f64) -> Result<f64> {
    let kh2 = (k_h * h).powi(2);
    let den = 3.0 - kh2;
    if den.abs() < 1e-12 {
        return Err(Error::invalid(format!("Helmholtz Jacobi damping undefined at k_H h = {}", kh2.sqrt())));
    }
    Ok((2.0 - kh2) / den)
}
