//! Preconditioned CG and restarted flexible GMRES.

mod fgmres;
mod pcg;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::norm2;

pub use fgmres::{fgmres, ArnoldiCapture, FgmresOptions};
pub use pcg::{pcg, pcg_observed};

/// Termination thresholds, checked in field order after every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopCriteria {
    pub abs_res: f64,
    /// `‖u_i − u_{i−1}‖_A`; `None` disables the test (indefinite problems).
    pub a_norm_increment: Option<f64>,
    pub rel_res: f64,
    pub max_iters: usize,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self { abs_res: 1e-12, a_norm_increment: Some(1e-12), rel_res: 1e-9, max_iters: 5000 }
    }
}

impl StopCriteria {
    /// Defaults, with the A-norm test dropped when `A` may be indefinite.
    pub fn for_problem(indefinite: bool) -> Self {
        let mut s = Self::default();
        if indefinite {
            s.a_norm_increment = None;
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.abs_res > 0.0 && self.rel_res > 0.0 && self.a_norm_increment.is_none_or(|t| t > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("stopping tolerances must be positive"))
        }
    }

    /// First satisfied criterion, given the current residual norm and the
    /// A-norm of the last increment (if computed).
    pub(crate) fn check(&self, res: f64, res0: f64, a_inc: Option<f64>, iters: usize) -> Option<Termination> {
        if res <= self.abs_res {
            return Some(Termination::AbsRes);
        }
        if let (Some(tol), Some(inc)) = (self.a_norm_increment, a_inc) {
            if inc <= tol {
                return Some(Termination::ANormInc);
            }
        }
        if res <= self.rel_res * res0 {
            return Some(Termination::RelRes);
        }
        (iters >= self.max_iters).then_some(Termination::MaxIters)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    AbsRes,
    ANormInc,
    RelRes,
    MaxIters,
    Breakdown,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::AbsRes | Termination::ANormInc | Termination::RelRes)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Termination::AbsRes => "abs_res",
            Termination::ANormInc => "a_norm_inc",
            Termination::RelRes => "rel_res",
            Termination::MaxIters => "max_iters",
            Termination::Breakdown => "breakdown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖r_i‖` for `i = 0..=iterations`.
    pub residual_history: Vec<f64>,
    pub termination: Termination,
    pub solution: Vec<f64>,
}

impl SolveReport {
    pub fn final_rel_res(&self) -> f64 {
        let r0 = self.residual_history[0];
        let last = *self.residual_history.last().expect("history is never empty");
        if r0 == 0.0 { 0.0 } else { last / r0 }
    }

    pub fn converged(&self) -> bool {
        self.termination.converged()
    }
}

/// Norm used for the A-norm increment test, clamped at zero.
pub(crate) fn a_norm(quad: f64) -> f64 {
    quad.max(0.0).sqrt()
}

pub(crate) fn initial(a: &crate::linalg::CsrMatrix, f: &[f64], x0: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = a.n_rows();
    if a.n_cols() != n {
        return Err(Error::dim("krylov: square matrix", n, a.n_cols()));
    }
    if f.len() != n {
        return Err(Error::dim("krylov: right-hand side", n, f.len()));
    }
    if x0.len() != n {
        return Err(Error::dim("krylov: initial guess", n, x0.len()));
    }
    let r = a.residual(f, x0)?;
    let nr = norm2(&r);
    Ok((r, nr))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::{assemble_diffusion, StructuredMesh};
    use crate::linalg::{CsrMatrix, DenseMatrix};
    use crate::precond::{ExactInverse, Identity, Jacobi};

    fn poisson(cells: usize) -> CsrMatrix {
        let m = StructuredMesh::new(1, cells).unwrap();
        assemble_diffusion(&m, &vec![1.0; cells + 1]).unwrap()
    }

    #[test]
    fn identity_system_takes_one_iteration() {
        let a = CsrMatrix::identity(6);
        let f = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x0 = [0.0; 6];
        let rep = pcg(&a, &f, &Identity::new(6), &x0, &StopCriteria::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        let opts = FgmresOptions { restart: 5, ..Default::default() };
        let (rep, _) = fgmres(&a, &f, &Identity::new(6), &x0, &StopCriteria::default(), &opts).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged());
    }

    #[test]
    fn nonsymmetric_two_by_two_in_one_cycle() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_row_major(2, 2, vec![2.0, 1.0, 0.0, 3.0]).unwrap(), 0.0);
        let f = [3.0, 3.0];
        let opts = FgmresOptions { restart: 2, capture: true, ..Default::default() };
        let stop = StopCriteria::for_problem(true);
        let (rep, caps) = fgmres(&a, &f, &Identity::new(2), &[0.0, 0.0], &stop, &opts).unwrap();
        assert!(rep.iterations <= 2 && rep.converged());
        assert_eq!(caps.len(), 1);
        assert!((rep.solution[0] - 1.0).abs() < 1e-12 && (rep.solution[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pcg_history_and_exact_preconditioner() {
        let a = poisson(40);
        let f: Vec<f64> = (0..41).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let x0 = crate::rng::initial_guess(0, 41);
        let rep = pcg(&a, &f, &ExactInverse::new(&a).unwrap(), &x0, &StopCriteria::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(rep.residual_history.len(), 2);
    }

    #[test]
    fn pcg_rejects_nonsymmetric_preconditioner() {
        let a = Arc::new(poisson(10));
        let j: Arc<dyn crate::precond::Preconditioner> = Arc::new(Jacobi::new(a.clone(), 0.5, 1).unwrap());
        let c = crate::precond::Composite::multiplicative(a.clone(), vec![j, Arc::new(Identity::new(11))]).unwrap();
        let err = pcg(&a, &[1.0; 11], &c, &[0.0; 11], &StopCriteria::default());
        assert!(matches!(err, Err(Error::Contract { .. })));
    }

    #[test]
    fn criteria_order_and_validation() {
        let s = StopCriteria::default();
        assert_eq!(s.check(1e-13, 1.0, Some(0.0), 1), Some(Termination::AbsRes));
        assert_eq!(s.check(1e-3, 1.0, Some(1e-13), 1), Some(Termination::ANormInc));
        assert_eq!(s.check(1e-10, 1.0, None, 1), Some(Termination::RelRes));
        assert_eq!(s.check(1.0, 1.0, None, 5000), Some(Termination::MaxIters));
        assert!(StopCriteria { rel_res: 0.0, ..s }.validate().is_err());
    }
}
