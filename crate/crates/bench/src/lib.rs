//! Fixtures shared by the benchmarks.

use onetprec::fem::{Problem, ProblemGenerator, ProblemKind, ProblemSpec};
use onetprec::linalg::DenseMatrix;

/// 2D diffusion at mesh level `level` (1600 unknowns at level 1).
pub fn diffusion_2d(level: u32, seed: u64) -> Problem {
    let spec = ProblemSpec::new(ProblemKind::Diff {
        dim: 2,
        k_mean: 0.5,
        k_std: 1.0,
        k_ell: 0.1,
        f_sigma: 1.0,
        f_ell: 0.05,
    })
    .with_level(level);
    ProblemGenerator::new(spec).and_then(|g| g.generate(seed)).expect("fixture problem")
}

/// 1D Helmholtz with `k_h = 60` on `cells` cells.
pub fn helmholtz_1d(cells: usize, seed: u64) -> Problem {
    let spec = ProblemSpec::new(ProblemKind::Helm1D { k_h: 60.0, f_sigma: 1.0, f_ell: 0.1 }).with_cells(cells);
    ProblemGenerator::new(spec).and_then(|g| g.generate(seed)).expect("fixture problem")
}

/// Deterministic dense matrix with entries in [-1, 1].
pub fn dense(rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |i, j| (((i * 131 + j * 71) % 197) as f64 / 98.0) - 1.0)
}
