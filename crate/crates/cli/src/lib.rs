//! Experiment harness: problems from a config file, preconditioners from an
//! expression, seed-averaged solves and the spectral/multigrid/Schwarz studies.

pub mod compose;
pub mod dataset;
pub mod expr;
pub mod run;
pub mod studies;

pub use compose::ModelStore;
pub use run::{RunConfig, RunRecord, SolverSpec};
