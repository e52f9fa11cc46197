//! Dense diagnostics of preconditioned iterations.

use crate::error::{Error, Result};
use crate::linalg::vector::{dot, norm2};
use crate::linalg::{sym_eig, CsrMatrix, DenseMatrix};

use super::Preconditioner;

/// `E = I − A M`, captured column by column by applying `M` to unit vectors.
pub fn error_propagation_dense(a: &CsrMatrix, m: &dyn Preconditioner) -> Result<DenseMatrix> {
    if !m.is_linear() {
        return Err(Error::Contract { label: m.label(), required: "linear" });
    }
    let n = a.n_rows();
    if m.dim() != n {
        return Err(Error::dim("error_propagation_dense", n, m.dim()));
    }
    let mut e = DenseMatrix::identity(n);
    let mut unit = vec![0.0; n];
    for j in 0..n {
        unit[j] = 1.0;
        let col = a.spmv(&m.apply(&unit)?)?;
        unit[j] = 0.0;
        for (i, v) in col.iter().enumerate() {
            e[(i, j)] -= v;
        }
    }
    Ok(e)
}

/// Per-mode amplification `‖E v_j‖ / ‖v_j‖` for the columns of `modes`.
pub fn mode_amplification(e: &DenseMatrix, modes: &DenseMatrix) -> Result<Vec<f64>> {
    let ev = e.matmul(modes)?;
    Ok((0..modes.cols()).map(|j| norm2(&ev.column(j)) / norm2(&modes.column(j))).collect())
}

/// Rayleigh quotients `⟨v_j, E v_j⟩ / ⟨v_j, v_j⟩`.
pub fn mode_rayleigh(e: &DenseMatrix, modes: &DenseMatrix) -> Result<Vec<f64>> {
    let ev = e.matmul(modes)?;
    Ok((0..modes.cols())
        .map(|j| {
            let v = modes.column(j);
            dot(&v, &ev.column(j)) / dot(&v, &v)
        })
        .collect())
}

/// Eigenpairs of the interior (non-Dirichlet) block of a symmetric `A`,
/// with eigenvectors extended by zeros on Dirichlet nodes. Ascending order.
pub fn dirichlet_modes(a: &CsrMatrix, dirichlet: &[bool]) -> Result<(Vec<f64>, DenseMatrix)> {
    if dirichlet.len() != a.n_rows() {
        return Err(Error::dim("dirichlet_modes", a.n_rows(), dirichlet.len()));
    }
    let interior: Vec<usize> = (0..a.n_rows()).filter(|&i| !dirichlet[i]).collect();
    let eig = sym_eig(&a.submatrix(&interior).to_dense())?;
    let mut modes = DenseMatrix::zeros(a.n_rows(), interior.len());
    for (li, &gi) in interior.iter().enumerate() {
        modes.row_mut(gi).copy_from_slice(eig.vectors.row(li));
    }
    Ok((eig.values, modes))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::{assemble_diffusion, StructuredMesh};
    use crate::precond::{ExactInverse, Jacobi, Zero};

    fn laplacian(cells: usize) -> (StructuredMesh, CsrMatrix) {
        let m = StructuredMesh::new(1, cells).unwrap();
        let a = assemble_diffusion(&m, &vec![1.0; cells + 1]).unwrap();
        (m, a)
    }

    #[test]
    fn exact_inverse_and_zero() {
        let (_, a) = laplacian(12);
        let e = error_propagation_dense(&a, &ExactInverse::new(&a).unwrap()).unwrap();
        assert!(e.max_abs() < 1e-12);
        let e = error_propagation_dense(&a, &Zero::new(13)).unwrap();
        assert_eq!(e.sub(&DenseMatrix::identity(13)).unwrap().max_abs(), 0.0);
        let amp = mode_amplification(&DenseMatrix::identity(3).scaled(0.5), &DenseMatrix::identity(3)).unwrap();
        assert_eq!(amp, vec![0.5; 3]);
    }

    #[test]
    fn jacobi_symbol_on_poisson() {
        let cells = 20;
        let h = 1.0 / cells as f64;
        let (m, a) = laplacian(cells);
        let gamma = 2.0 / 3.0;
        let e = error_propagation_dense(&a, &Jacobi::new(Arc::new(a.clone()), gamma, 1).unwrap()).unwrap();
        let int = m.interior_nodes();
        let block = e.select_rows(&int).select_columns(&int);
        let eig = sym_eig(&block).unwrap();
        let mut expected: Vec<f64> =
            (1..cells).map(|j| 1.0 - gamma * (1.0 - (j as f64 * std::f64::consts::PI * h).cos())).collect();
        expected.sort_by(f64::total_cmp);
        for (g, w) in eig.values.iter().zip(&expected) {
            assert!((g - w).abs() < 1e-10);
        }
        let (_, modes) = dirichlet_modes(&a, m.dirichlet_mask()).unwrap();
        let amp = mode_amplification(&e, &modes).unwrap();
        let ray = mode_rayleigh(&e, &modes).unwrap();
        assert!(amp.iter().all(|&x| x < 1.0));
        assert!(amp.iter().zip(&ray).all(|(a, r)| (a - r.abs()).abs() < 1e-10));
    }

    #[test]
    fn nonlinear_preconditioner_rejected() {
        struct Nl;
        impl Preconditioner for Nl {
            fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
                Ok(r.iter().map(|v| v * v).collect())
            }
            fn dim(&self) -> usize {
                3
            }
            fn is_linear(&self) -> bool {
                false
            }
            fn is_spd(&self) -> bool {
                false
            }
            fn label(&self) -> String {
                "square".into()
            }
        }
        assert!(error_propagation_dense(&CsrMatrix::identity(3), &Nl).is_err());
    }
}
