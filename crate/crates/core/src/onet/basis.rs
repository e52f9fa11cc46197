use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::model::OnetModel;

/// A family of functions on [0,1]^d that can be sampled at points; the
/// DeepONet trunk is one, analytic fixtures are others.
pub trait BasisFunctions: Send + Sync {
    fn n_basis(&self) -> usize;
    fn dim(&self) -> usize;
    /// `n × n_basis` matrix of values at row-major points.
    fn eval(&self, points: &[f64]) -> Result<DenseMatrix>;
    fn label(&self) -> String;
}

impl BasisFunctions for OnetModel {
    fn n_basis(&self) -> usize {
        self.p
    }
    fn dim(&self) -> usize {
        self.trunk_input
    }
    fn eval(&self, points: &[f64]) -> Result<DenseMatrix> {
        self.trunk_eval(points)
    }
    fn label(&self) -> String {
        format!("onet(p={})", self.p)
    }
}

/// Dirichlet Laplacian eigenfunctions `Π_i sin(m_i π x_i)`, lowest
/// frequency `Σ m_i²` first (ties broken lexicographically).
#[derive(Debug, Clone, PartialEq)]
pub struct SineBasis {
    dim: usize,
    modes: Vec<[usize; 3]>,
}

impl SineBasis {
    pub fn new(dim: usize, count: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) || count == 0 {
            return Err(Error::invalid("sine basis needs dim in 1..=3 and at least one mode"));
        }
        // Enough frequencies per axis to contain the `count` lowest modes.
        // A quarter ball holding `count` lattice points has radius below (2^d count)^(1/d).
        let max = ((count << dim) as f64).powf(1.0 / dim as f64).ceil() as usize + 2;
        let mut modes = Vec::new();
        let range = |axis: usize| if axis < dim { 1..=max } else { 1..=1 };
        for a in range(0) {
            for b in range(1) {
                for c in range(2) {
                    modes.push([a, if dim > 1 { b } else { 0 }, if dim > 2 { c } else { 0 }]);
                }
            }
        }
        modes.sort_by_key(|m| (m.iter().map(|v| v * v).sum::<usize>(), *m));
        modes.truncate(count);
        Ok(Self { dim, modes })
    }

    pub fn modes(&self) -> &[[usize; 3]] {
        &self.modes
    }
}

fn sin_pi(m: usize, x: f64) -> f64 {
    // Exact zeros on the boundary of the unit cube.
    if x == 0.0 || x == 1.0 { 0.0 } else { (m as f64 * PI * x).sin() }
}

impl BasisFunctions for SineBasis {
    fn n_basis(&self) -> usize {
        self.modes.len()
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, points: &[f64]) -> Result<DenseMatrix> {
        let d = self.dim;
        if !points.len().is_multiple_of(d) {
            return Err(Error::dim("SineBasis::eval", d, points.len() % d));
        }
        let n = points.len() / d;
        Ok(DenseMatrix::from_fn(n, self.modes.len(), |j, k| {
            let x = &points[j * d..(j + 1) * d];
            (0..d).map(|a| sin_pi(self.modes[k][a], x[a])).product()
        }))
    }
    fn label(&self) -> String {
        format!("sine(k={})", self.modes.len())
    }
}
