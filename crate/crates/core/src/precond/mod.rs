//! Preconditioners under one apply contract, and their composition algebra.
//!
//! Every preconditioner maps a residual to a correction, `z = M r`, and
//! declares whether that map is linear and symmetric positive definite.
//! Krylov drivers rely on these flags: PCG refuses anything that is not
//! linear and SPD, F-GMRES accepts everything.

pub mod analysis;
pub mod asm;
pub mod composite;
pub mod jacobi;
pub mod mg;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{is_positive_definite, BandedLu, CsrMatrix};

pub use analysis::{dirichlet_modes, error_propagation_dense, mode_amplification, mode_rayleigh};
pub use asm::{partition_structured, Asm, Partition};
pub use composite::{Composite, CompositionMode};
pub use jacobi::{jacobi_gamma_helmholtz, Jacobi};
pub use mg::{geometric_levels, GeometricLevel, LevelSmoother, MgHierarchy, MgLevel};

pub trait Preconditioner: Send + Sync {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
    fn dim(&self) -> usize;
    fn is_linear(&self) -> bool;
    fn is_spd(&self) -> bool;
    fn label(&self) -> String;
}

pub type SharedPrec = Arc<dyn Preconditioner>;

pub(crate) fn check_len(ctx: &'static str, expected: usize, r: &[f64]) -> Result<()> {
    if r.len() == expected {
        Ok(())
    } else {
        Err(Error::dim(ctx, expected, r.len()))
    }
}

/// Symmetric to rounding, relative to the largest entry.
pub(crate) fn is_symmetric(a: &CsrMatrix) -> bool {
    let scale = a.vals().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.asymmetry() <= 1e-12 * scale
}

/// `M = I`.
#[derive(Debug, Clone)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("Identity::apply", self.n, r)?;
        Ok(r.to_vec())
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        true
    }
    fn label(&self) -> String {
        "identity".into()
    }
}

/// `M = A⁻¹` through a banded LU factorization.
#[derive(Debug, Clone)]
pub struct ExactInverse {
    lu: BandedLu,
    spd: bool,
}

impl ExactInverse {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let lu = BandedLu::factor(a)?;
        let spd = is_symmetric(a) && is_positive_definite(a);
        Ok(Self { lu, spd })
    }
}

impl Preconditioner for ExactInverse {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(r)
    }
    fn dim(&self) -> usize {
        self.lu.dim()
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        self.spd
    }
    fn label(&self) -> String {
        "exact".into()
    }
}

/// `M = 0`; handy as a neutral element in analysis.
#[derive(Debug, Clone)]
pub struct Zero {
    n: usize,
}

impl Zero {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl Preconditioner for Zero {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("Zero::apply", self.n, r)?;
        Ok(vec![0.0; self.n])
    }
    fn dim(&self) -> usize {
        self.n
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        false
    }
    fn label(&self) -> String {
        "zero".into()
    }
}
