//! DeepONet inference and the two ways of using it inside a preconditioner:
//! trunk-basis coarse spaces and direct preconditioning.

pub mod basis;
pub mod coarse;
pub mod dp;
pub mod model;
mod pack;

pub use basis::{BasisFunctions, SineBasis};
pub use coarse::{select_columns, tb_dense, tb_sparse, CoarseSpace, Prolongation, TbBasis, TbOptions};
pub use dp::{interpolation_matrix, DpPreconditioner};
pub use model::{Activation, BoundaryMask, Branch, Layer, LayerKind, OnetModel, SensorGrid};
