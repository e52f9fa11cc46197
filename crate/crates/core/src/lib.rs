//! Hybrid DeepONet / iterative preconditioners for parametric linear systems.
//!
//! The crate is organised bottom-up: [`linalg`] kernels, [`fem`] problem
//! assembly, [`krylov`] solvers, the [`precond`] composition algebra and the
//! [`onet`] inference layer that plugs neural operators into it.

pub mod container;
pub mod error;
pub mod fem;
pub mod krylov;
pub mod linalg;
pub mod onet;
pub mod precond;
pub mod rng;

pub use container::{Tensor, TensorData, TensorPack};
pub use error::{Error, Result};
pub use fem::{Problem, ProblemGenerator, ProblemKind, ProblemSpec, StructuredMesh};
pub use krylov::{fgmres, pcg, FgmresOptions, SolveReport, StopCriteria, Termination};
pub use linalg::{CsrMatrix, DenseMatrix};
pub use onet::{BasisFunctions, OnetModel, SineBasis};
pub use precond::{Preconditioner, SharedPrec};
