//! Coarse spaces built from basis functions (trunk basis, "TB").

use rand::Rng;

use crate::error::{Error, Result};
use crate::fem::StructuredMesh;
use crate::linalg::{qr_thin, Cholesky, CsrMatrix, DenseLu, DenseMatrix, TripletBuilder};
use crate::precond::{check_len, is_symmetric, Partition, Preconditioner};

use super::basis::BasisFunctions;

/// Default relative QR drop threshold.
pub const DEFAULT_EPS_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TbOptions {
    /// Number of basis functions drawn (per subdomain for block-sparse spaces).
    pub k: usize,
    /// Columns with `R_jj < eps_rel · max R_jj` are dropped.
    pub eps_rel: f64,
}

impl TbOptions {
    pub fn new(k: usize) -> Self {
        Self { k, eps_rel: DEFAULT_EPS_REL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prolongation {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl Prolongation {
    pub fn n_rows(&self) -> usize {
        match self {
            Prolongation::Dense(p) => p.rows(),
            Prolongation::Sparse(p) => p.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Prolongation::Dense(p) => p.cols(),
            Prolongation::Sparse(p) => p.n_cols(),
        }
    }

    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        match self {
            Prolongation::Dense(p) => p.matvec(y),
            Prolongation::Sparse(p) => p.spmv(y),
        }
    }

    pub fn apply_t(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Prolongation::Dense(p) => p.t_matvec(v),
            Prolongation::Sparse(p) => p.t_spmv(v),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Prolongation::Dense(p) => p.clone(),
            Prolongation::Sparse(p) => p.to_dense(),
        }
    }

    /// `Pᵀ A P`.
    pub fn galerkin(&self, a: &CsrMatrix) -> Result<DenseMatrix> {
        match self {
            Prolongation::Dense(p) => p.t_matmul(&a.matmul_dense(p)?),
            Prolongation::Sparse(p) => Ok(p.transpose().matmul(&a.matmul(p)?)?.to_dense()),
        }
    }
}

/// Transfer operator plus how it was obtained.
#[derive(Debug, Clone)]
pub struct TbBasis {
    pub p: Prolongation,
    /// Basis indices drawn (sorted).
    pub selected: Vec<usize>,
    /// Number of columns surviving the QR filter.
    pub kept: usize,
    pub eps_rel: f64,
    pub smoothing: Option<f64>,
}

/// Draw `k` of `p` indices; all of them, in order, when `k == p`.
pub fn select_columns<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    if k == 0 || k > p {
        return Err(Error::invalid(format!("cannot select {k} of {p} basis functions")));
    }
    if k == p {
        return Ok((0..p).collect());
    }
    let mut idx = rand::seq::index::sample(rng, p, k).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Orthonormal columns spanning `m`, dropping those with small `R_jj`.
fn qr_filter(m: &DenseMatrix, eps_rel: f64) -> DenseMatrix {
    let cols = m.cols().min(m.rows());
    let m = if cols < m.cols() { m.select_columns(&(0..cols).collect::<Vec<_>>()) } else { m.clone() };
    let qr = qr_thin(&m);
    let diag: Vec<f64> = (0..cols).map(|j| qr.r[(j, j)]).collect();
    let max = diag.iter().fold(0.0f64, |a, &b| a.max(b));
    let keep: Vec<usize> = (0..cols).filter(|&j| max > 0.0 && diag[j] >= eps_rel * max).collect();
    qr.q.select_columns(&keep)
}

fn sampled_basis<R: Rng + ?Sized>(
    basis: &dyn BasisFunctions,
    mesh: &StructuredMesh,
    k: usize,
    rng: &mut R,
) -> Result<(DenseMatrix, Vec<usize>)> {
    if basis.dim() != mesh.dim() {
        return Err(Error::dim("basis dimension", mesh.dim(), basis.dim()));
    }
    let selected = select_columns(basis.n_basis(), k, rng)?;
    let mut t = basis.eval(mesh.coords())?.select_columns(&selected);
    for (i, &dir) in mesh.dirichlet_mask().iter().enumerate() {
        if dir {
            t.row_mut(i).fill(0.0);
        }
    }
    Ok((t, selected))
}

/// Dense TB transfer: `k` random basis columns at the mesh nodes, orthonormalized.
pub fn tb_dense<R: Rng + ?Sized>(
    basis: &dyn BasisFunctions,
    mesh: &StructuredMesh,
    opts: &TbOptions,
    rng: &mut R,
) -> Result<TbBasis> {
    let (t, selected) = sampled_basis(basis, mesh, opts.k, rng)?;
    let q = qr_filter(&t, opts.eps_rel);
    if q.cols() == 0 {
        return Err(Error::invalid("every basis column was dropped by the QR filter"));
    }
    Ok(TbBasis { kept: q.cols(), p: Prolongation::Dense(q), selected, eps_rel: opts.eps_rel, smoothing: None })
}

/// Block-sparse TB transfer: one orthonormal block per non-overlapping
/// subdomain, optionally followed by one Jacobi prolongation-smoothing step
/// `P = (I − γ D⁻¹ A) P̄`.
pub fn tb_sparse<R: Rng + ?Sized>(
    basis: &dyn BasisFunctions,
    mesh: &StructuredMesh,
    partition: &Partition,
    opts: &TbOptions,
    smoothing: Option<(&CsrMatrix, f64)>,
    rng: &mut R,
) -> Result<TbBasis> {
    let n = mesh.n_nodes();
    let (t, selected) = sampled_basis(basis, mesh, opts.k, rng)?;
    let mut triplets = Vec::new();
    let mut offset = 0;
    for rows in &partition.owned {
        if rows.iter().any(|&i| i >= n) {
            return Err(Error::invalid("partition does not match the mesh"));
        }
        let q = qr_filter(&t.select_rows(rows), opts.eps_rel);
        for (li, &gi) in rows.iter().enumerate() {
            for c in 0..q.cols() {
                triplets.push((gi, offset + c, q[(li, c)]));
            }
        }
        offset += q.cols();
    }
    if offset == 0 {
        return Err(Error::invalid("every basis column was dropped by the QR filter"));
    }
    let mut tb = TripletBuilder::with_capacity(n, offset, triplets.len());
    triplets.into_iter().for_each(|(i, j, v)| tb.push(i, j, v));
    let mut p = tb.build();
    if let Some((a, gamma)) = smoothing {
        if a.n_rows() != n {
            return Err(Error::dim("tb_sparse smoothing operator", n, a.n_rows()));
        }
        let ap = a.matmul(&p)?;
        let d = a.diagonal();
        let mut b = TripletBuilder::with_capacity(n, offset, p.nnz() + ap.nnz());
        for i in 0..n {
            let (cols, vals) = p.row(i);
            cols.iter().zip(vals).for_each(|(&j, &v)| b.push(i, j, v));
            let (cols, vals) = ap.row(i);
            cols.iter().zip(vals).for_each(|(&j, &v)| b.push(i, j, -gamma * v / d[i]));
        }
        p = b.build();
    }
    Ok(TbBasis { kept: offset, p: Prolongation::Sparse(p), selected, eps_rel: opts.eps_rel, smoothing: smoothing.map(|s| s.1) })
}

/// Exact coarse correction `C = P A_c⁻¹ Pᵀ` with `A_c = Pᵀ A P`.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    p: Prolongation,
    a_c: DenseMatrix,
    lu: DenseLu,
    spd: bool,
    label: String,
}

impl CoarseSpace {
    pub fn new(a: &CsrMatrix, p: Prolongation, label: impl Into<String>) -> Result<Self> {
        if p.n_rows() != a.n_rows() {
            return Err(Error::dim("CoarseSpace prolongation", a.n_rows(), p.n_rows()));
        }
        let a_c = p.galerkin(a)?;
        let lu = DenseLu::factor(&a_c).map_err(|_| Error::SingularCoarse)?;
        let spd = is_symmetric(a) && Cholesky::factor(&a_c).is_ok();
        Ok(Self { p, a_c, lu, spd, label: label.into() })
    }

    pub fn prolongation(&self) -> &Prolongation {
        &self.p
    }

    pub fn coarse_operator(&self) -> &DenseMatrix {
        &self.a_c
    }
}

impl Preconditioner for CoarseSpace {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("CoarseSpace::apply", self.p.n_rows(), v)?;
        self.p.apply(&self.lu.solve(&self.p.apply_t(v)?)?)
    }
    fn dim(&self) -> usize {
        self.p.n_rows()
    }
    fn is_linear(&self) -> bool {
        true
    }
    fn is_spd(&self) -> bool {
        self.spd
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fem::assemble_diffusion;
    use crate::linalg::sym_eig;
    use crate::onet::SineBasis;
    use crate::precond::{error_propagation_dense, partition_structured, Composite, Jacobi};

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(9)
    }

    fn orthonormality_defect(p: &DenseMatrix) -> f64 {
        p.t_matmul(p).unwrap().sub(&DenseMatrix::identity(p.cols())).unwrap().frobenius()
    }

    #[test]
    fn sine_basis_is_kept_whole_and_orthonormal() {
        let mesh = StructuredMesh::new(1, 30).unwrap();
        let tb = tb_dense(&SineBasis::new(1, 6).unwrap(), &mesh, &TbOptions::new(6), &mut rng()).unwrap();
        assert_eq!(tb.kept, 6);
        assert!(orthonormality_defect(&tb.p.to_dense()) < 1e-12);
    }

    #[test]
    fn duplicate_columns_are_filtered() {
        struct Dup;
        impl BasisFunctions for Dup {
            fn n_basis(&self) -> usize {
                4
            }
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, pts: &[f64]) -> Result<DenseMatrix> {
                Ok(DenseMatrix::from_fn(pts.len(), 4, |i, j| (((j % 2) + 1) as f64 * pts[i] * 3.0).sin()))
            }
            fn label(&self) -> String {
                "dup".into()
            }
        }
        let mesh = StructuredMesh::new(1, 20).unwrap();
        let tb = tb_dense(&Dup, &mesh, &TbOptions::new(4), &mut rng()).unwrap();
        assert_eq!(tb.kept, 2);
        assert!(orthonormality_defect(&tb.p.to_dense()) < 1e-12);
    }

    #[test]
    fn single_block_sparse_equals_dense() {
        let mesh = StructuredMesh::new(2, 9).unwrap();
        let basis = SineBasis::new(2, 5).unwrap();
        let part = partition_structured(&mesh, 1, 0).unwrap();
        let d = tb_dense(&basis, &mesh, &TbOptions::new(5), &mut rng()).unwrap();
        let s = tb_sparse(&basis, &mesh, &part, &TbOptions::new(5), None, &mut rng()).unwrap();
        assert!(d.p.to_dense().sub(&s.p.to_dense()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn unsmoothed_blocks_are_globally_orthonormal() {
        let mesh = StructuredMesh::new(2, 15).unwrap();
        let part = partition_structured(&mesh, 16, 0).unwrap();
        let s = tb_sparse(&SineBasis::new(2, 4).unwrap(), &mesh, &part, &TbOptions::new(4), None, &mut rng()).unwrap();
        assert!(orthonormality_defect(&s.p.to_dense()) < 1e-12);
        assert!(s.kept <= 64);
    }

    #[test]
    fn smoothing_widens_support_by_one_layer() {
        let mesh = StructuredMesh::new(1, 19).unwrap();
        let a = assemble_diffusion(&mesh, &[1.0; 20]).unwrap();
        let part = partition_structured(&mesh, 2, 0).unwrap();
        let basis = SineBasis::new(1, 2).unwrap();
        let raw = tb_sparse(&basis, &mesh, &part, &TbOptions::new(2), None, &mut rng()).unwrap();
        let sm = tb_sparse(&basis, &mesh, &part, &TbOptions::new(2), Some((&a, 2.0 / 3.0)), &mut rng()).unwrap();
        let (Prolongation::Sparse(r), Prolongation::Sparse(s)) = (&raw.p, &sm.p) else { panic!() };
        assert!(s.nnz() > r.nnz());
        // column 0 lives on nodes 0..10; smoothing reaches node 10 only
        assert_eq!(r.get(10, 0), 0.0);
        assert!(s.get(10, 0) != 0.0);
        assert_eq!(s.get(11, 0), 0.0);
    }

    #[test]
    fn identity_transfer_gives_exact_inverse() {
        let mesh = StructuredMesh::new(1, 8).unwrap();
        let a = assemble_diffusion(&mesh, &[1.0; 9]).unwrap();
        let c = CoarseSpace::new(&a, Prolongation::Dense(DenseMatrix::identity(9)), "c").unwrap();
        let e = error_propagation_dense(&a, &c).unwrap();
        assert!(e.max_abs() < 1e-12);
        assert!(c.is_spd());
    }

    #[test]
    fn sine_coarse_space_annihilates_its_modes() {
        let cells = 40;
        let mesh = StructuredMesh::new(1, cells).unwrap();
        let a = Arc::new(assemble_diffusion(&mesh, &vec![1.0; cells + 1]).unwrap());
        let basis = SineBasis::new(1, 5).unwrap();
        let tb = tb_dense(&basis, &mesh, &TbOptions::new(5), &mut rng()).unwrap();
        let c = Arc::new(CoarseSpace::new(&a, tb.p.clone(), "tb").unwrap());
        let ac = c.coarse_operator();
        assert!(sym_eig(&ac.scaled(0.5).sub(&ac.transpose().scaled(-0.5)).unwrap()).unwrap().values[0] > 0.0);
        let j = Arc::new(Jacobi::new(a.clone(), 2.0 / 3.0, 1).unwrap());
        let two = Composite::multiplicative(a.clone(), vec![j, c]).unwrap();
        let e = error_propagation_dense(&a, &two).unwrap();
        let ev = e.matmul(&tb.p.to_dense()).unwrap();
        assert!(ev.max_abs() < 1e-10, "{}", ev.max_abs());
    }
}
