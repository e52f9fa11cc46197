use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};

use super::mesh::StructuredMesh;

/// P1 interpolation from `coarse` to its uniform refinement `fine`.
///
/// Every fine node is either a coarse node or the midpoint of a coarse edge
/// running along the split diagonal, so the weights are 1 or 1/2 each.
/// Rows of fine Dirichlet nodes and columns of coarse Dirichlet nodes are zero.
pub fn prolongation(coarse: &StructuredMesh, fine: &StructuredMesh) -> Result<CsrMatrix> {
    if coarse.dim() != fine.dim() || fine.cells_per_axis() != 2 * coarse.cells_per_axis() {
        return Err(Error::invalid("prolongation needs a mesh and its uniform refinement"));
    }
    let d = fine.dim();
    let mut tb = TripletBuilder::with_capacity(fine.n_nodes(), coarse.n_nodes(), 2 * fine.n_nodes());
    for node in 0..fine.n_nodes() {
        if fine.dirichlet_mask()[node] {
            continue;
        }
        let idx = fine.node_index(node);
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for a in 0..d {
            lo[a] = idx[a] / 2;
            hi[a] = idx[a].div_ceil(2);
        }
        let (cl, ch) = (coarse.node_at(lo), coarse.node_at(hi));
        let mask = coarse.dirichlet_mask();
        if cl == ch {
            tb.push(node, cl, 1.0);
        } else {
            for c in [cl, ch] {
                if !mask[c] {
                    tb.push(node, c, 0.5);
                }
            }
        }
    }
    Ok(tb.build())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_diffusion;

    #[test]
    fn interpolates_linear_functions_exactly_inside() {
        for dim in 1..=3 {
            let c = StructuredMesh::new(dim, 4).unwrap();
            let f = c.refined().unwrap();
            let p = prolongation(&c, &f).unwrap();
            // A function vanishing on the boundary is reproduced at every node
            // where it is linear along the split edges: the product bubble is
            // not linear, so use the coordinate sum on a far-from-boundary check.
            let lin = |x: &[f64]| x.iter().sum::<f64>();
            let uc: Vec<f64> = (0..c.n_nodes())
                .map(|i| if c.dirichlet_mask()[i] { 0.0 } else { lin(c.coord(i)) })
                .collect();
            let uf = p.spmv(&uc).unwrap();
            for node in 0..f.n_nodes() {
                let idx = f.node_index(node);
                let deep = idx[..dim].iter().all(|&i| i >= 2 && i <= f.cells_per_axis() - 2);
                if deep {
                    assert!((uf[node] - lin(f.coord(node))).abs() < 1e-14);
                }
                if f.dirichlet_mask()[node] {
                    assert_eq!(uf[node], 0.0);
                }
            }
        }
    }

    #[test]
    fn galerkin_product_halves_1d_stiffness() {
        let c = StructuredMesh::new(1, 8).unwrap();
        let f = c.refined().unwrap();
        let p = prolongation(&c, &f).unwrap();
        let af = assemble_diffusion(&f, &vec![1.0; f.n_nodes()]).unwrap();
        let ac = assemble_diffusion(&c, &vec![1.0; c.n_nodes()]).unwrap();
        let rap = p.transpose().matmul(&af.matmul(&p).unwrap()).unwrap();
        let int = c.interior_nodes();
        let d = rap.submatrix(&int).to_dense().sub(&ac.submatrix(&int).to_dense()).unwrap();
        assert!(d.max_abs() < 1e-12);
    }

    #[test]
    fn rejects_non_nested_pair() {
        let c = StructuredMesh::new(2, 4).unwrap();
        let f = StructuredMesh::new(2, 7).unwrap();
        assert!(prolongation(&c, &f).is_err());
    }
}
