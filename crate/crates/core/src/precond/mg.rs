use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{prolongation, StructuredMesh};
use crate::linalg::vector::axpy;
use crate::linalg::{BandedLu, CsrMatrix, TripletBuilder};

use super::{check_len, is_symmetric, Preconditioner, SharedPrec};

/// Smoother slot of one level in a schedule.
#[derive(Clone)]
pub enum LevelSmoother {
    Smoother(SharedPrec),
    /// Direct solve; only allowed on the coarsest level.
    Direct,
}

/// One level, finest first. `prolongation` maps the next coarser level into this one.
#[derive(Clone)]
pub struct MgLevel {
    pub a: Arc<CsrMatrix>,
    pub smoother: LevelSmoother,
    pub prolongation: Option<CsrMatrix>,
}

/// Geometric V-cycle with symmetric pre/post smoothing.
pub struct MgHierarchy {
    a: Vec<Arc<CsrMatrix>>,
    smoothers: Vec<SharedPrec>,
    p: Vec<CsrMatrix>,
    r: Vec<CsrMatrix>,
    direct: BandedLu,
    spd: bool,
    label: String,
}

impl MgHierarchy {
    pub fn new(levels: Vec<MgLevel>, galerkin: bool) -> Result<Self> {
        let n_levels = levels.len();
        if n_levels == 0 {
            return Err(Error::invalid("multigrid needs at least one level"));
        }
        let mut a = Vec::new();
        let mut smoothers = Vec::new();
        let mut p = Vec::new();
        let mut direct = None;
        let mut names = Vec::new();
        for (l, lev) in levels.into_iter().enumerate() {
            let last = l + 1 == n_levels;
            match (&lev.smoother, last) {
                (LevelSmoother::Direct, true) => {
                    direct = Some(BandedLu::factor(&lev.a)?);
                    names.push("D".to_string());
                }
                (LevelSmoother::Direct, false) => {
                    return Err(Error::invalid(format!("direct solver scheduled on non-coarsest level {l}")));
                }
                (LevelSmoother::Smoother(_), true) => {
                    return Err(Error::invalid("the coarsest schedule entry must be the direct solver"));
                }
                (LevelSmoother::Smoother(s), false) => {
                    if s.dim() != lev.a.n_rows() {
                        return Err(Error::dim("MgHierarchy smoother", lev.a.n_rows(), s.dim()));
                    }
                    smoothers.push(s.clone());
                    names.push(s.label());
                }
            }
            if !last {
                let pl = lev
                    .prolongation
                    .ok_or_else(|| Error::invalid(format!("level {l} lacks a prolongation")))?;
                if pl.n_rows() != lev.a.n_rows() {
                    return Err(Error::dim("MgHierarchy prolongation rows", lev.a.n_rows(), pl.n_rows()));
                }
                p.push(pl);
            }
            a.push(lev.a);
        }
        for (l, pl) in p.iter().enumerate() {
            if pl.n_cols() != a[l + 1].n_rows() {
                return Err(Error::dim("MgHierarchy prolongation cols", a[l + 1].n_rows(), pl.n_cols()));
            }
        }
        let r = p.iter().map(CsrMatrix::transpose).collect();
        let spd = galerkin
            && is_symmetric(&a[n_levels - 1])
            && crate::linalg::is_positive_definite(&a[n_levels - 1])
            && smoothers.iter().all(|s| s.is_spd() && s.is_linear());
        Ok(Self {
            a,
            smoothers,
            p,
            r,
            direct: direct.expect("last level checked"),
            spd,
            label: format!("mg<{}>", names.join(",")),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.a.len()
    }

    fn cycle(&self, l: usize, r: &[f64]) -> Result<Vec<f64>> {
        if l + 1 == self.a.len() {
            return self.direct.solve(r);
        }
        let a = &self.a[l];
        let s = &self.smoothers[l];
        let mut x = s.apply(r)?;
        let res = a.residual(r, &x)?;
        let xc = self.cycle(l + 1, &self.r[l].spmv(&res)?)?;
        axpy(1.0, &self.p[l].spmv(&xc)?, &mut x);
        let res = a.residual(r, &x)?;
        axpy(1.0, &s.apply(&res)?, &mut x);
        Ok(x)
    }
}

impl Preconditioner for MgHierarchy {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len("MgHierarchy::apply", self.a[0].n_rows(), r)?;
        self.cycle(0, r)
    }
    fn dim(&self) -> usize {
        self.a[0].n_rows()
    }
    fn is_linear(&self) -> bool {
        self.smoothers.iter().all(|s| s.is_linear())
    }
    fn is_spd(&self) -> bool {
        self.spd
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

/// Mesh, operator and prolongation (from the next coarser level) of one level.
#[derive(Debug, Clone)]
pub struct GeometricLevel {
    pub mesh: StructuredMesh,
    pub a: Arc<CsrMatrix>,
    pub prolongation: Option<CsrMatrix>,
}

/// Nested hierarchy obtained by repeatedly halving `fine`, finest first.
///
/// Operators are re-assembled with `assemble` on every mesh, or formed as
/// `Pᵀ A P` (identity on coarse Dirichlet rows) when `galerkin` is set.
pub fn geometric_levels<F>(fine: &StructuredMesh, n_levels: usize, galerkin: bool, assemble: F) -> Result<Vec<GeometricLevel>>
where
    F: Fn(&StructuredMesh) -> Result<CsrMatrix>,
{
    if n_levels == 0 {
        return Err(Error::invalid("need at least one level"));
    }
    let mut meshes = vec![fine.clone()];
    for _ in 1..n_levels {
        let m = meshes.last().expect("nonempty");
        let c = m.cells_per_axis();
        if c % 2 != 0 || c / 2 < 2 {
            return Err(Error::invalid(format!(
                "{c} cells per axis cannot be coarsened {} times",
                n_levels - 1
            )));
        }
        meshes.push(StructuredMesh::new(m.dim(), c / 2)?);
    }
    let mut out: Vec<GeometricLevel> = Vec::with_capacity(n_levels);
    for l in 0..n_levels {
        let prolongation = if l + 1 < n_levels { Some(prolongation(&meshes[l + 1], &meshes[l])?) } else { None };
        let a = if galerkin && l > 0 {
            let fine_a = &out[l - 1].a;
            let p = out[l - 1].prolongation.as_ref().expect("set for non-coarsest");
            galerkin_product(fine_a, p, meshes[l].dirichlet_mask())?
        } else {
            assemble(&meshes[l])?
        };
        out.push(GeometricLevel { mesh: meshes[l].clone(), a: Arc::new(a), prolongation });
    }
    Ok(out)
}

fn galerkin_product(a: &CsrMatrix, p: &CsrMatrix, coarse_dirichlet: &[bool]) -> Result<CsrMatrix> {
    let rap = p.transpose().matmul(&a.matmul(p)?)?;
    let mut tb = TripletBuilder::with_capacity(rap.n_rows(), rap.n_cols(), rap.nnz() + coarse_dirichlet.len());
    for i in 0..rap.n_rows() {
        let (cols, vals) = rap.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            tb.push(i, j, v);
        }
        if coarse_dirichlet[i] {
            tb.push(i, i, 1.0);
        }
    }
    Ok(tb.build())
}
