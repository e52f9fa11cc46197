//! Structured P1 finite elements for the benchmark problems.

pub mod assembly;
pub mod grf;
pub mod mesh;
pub mod problem;
pub mod transfer;

pub use assembly::{
    assemble_diffusion, assemble_diffusion_elementwise, assemble_helmholtz, assemble_mass,
    eliminate_dirichlet, helmholtz_h_bound, load_vector, lump_mass,
};
pub use grf::GrfSampler;
pub use mesh::{level_cells, StructuredMesh};
pub use problem::{Problem, ProblemGenerator, ProblemKind, ProblemMeta, ProblemSpec};
pub use transfer::prolongation;
