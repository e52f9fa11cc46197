//! Dense and sparse kernels shared by every solver component.
//!
//! Vectors are plain `Vec<f64>` / `&[f64]`; the helpers in [`vector`] cover
//! the BLAS-1 operations the iterative methods need.

mod cholesky;
mod csr;
mod dense;
mod eig;
mod lu;
mod qr;
pub mod vector;

pub use cholesky::{is_positive_definite, Cholesky};
pub use csr::{CsrMatrix, TripletBuilder};
pub use dense::DenseMatrix;
pub use eig::{spectral_radius_estimate, sym_eig, SymEig};
pub use lu::{BandedLu, DenseLu};
pub use qr::{qr_thin, ThinQr};
