//! Direct preconditioning: a DeepONet forward pass approximates `C v`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{lump_mass, ProblemMeta, StructuredMesh};
use crate::linalg::{CsrMatrix, DenseMatrix, TripletBuilder};
use crate::precond::{check_len, Preconditioner};

use super::model::OnetModel;

/// Multilinear interpolation from mesh nodes to `points` (row-major).
pub fn interpolation_matrix(mesh: &StructuredMesh, points: &[f64]) -> Result<CsrMatrix> {
    let d = mesh.dim();
    if !points.len().is_multiple_of(d) {
        return Err(Error::dim("interpolation points", d, points.len() % d));
    }
    let n_pts = points.len() / d;
    let cells = mesh.cells_per_axis();
    let h = mesh.h();
    let mut tb = TripletBuilder::with_capacity(n_pts, mesh.n_nodes(), n_pts << d);
    for j in 0..n_pts {
        let x = &points[j * d..(j + 1) * d];
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        for a in 0..d {
            if !(0.0..=1.0).contains(&x[a]) {
                return Err(Error::invalid(format!("sensor coordinate {} outside [0,1]", x[a])));
            }
            let c = ((x[a] / h).floor() as usize).min(cells - 1);
            base[a] = c;
            t[a] = x[a] / h - c as f64;
        }
        for corner in 0..(1usize << d) {
            let mut idx = [0usize; 3];
            let mut w = 1.0;
            for a in 0..d {
                let up = (corner >> a) & 1;
                idx[a] = base[a] + up;
                w *= if up == 1 { t[a] } else { 1.0 - t[a] };
            }
            if w != 0.0 {
                tb.push(j, mesh.node_at(idx), w);
            }
        }
    }
    Ok(tb.build())
}

/// `z = Σ_k Π_{l≠f} B^l_k(y^l) · B^f_k(R v) · T_k(x)`, with the residual
/// mapped to nodal values by the lumped mass and then interpolated to the
/// sensors of the right-hand-side branch. Nonlinear in `v`.
pub struct DpPreconditioner {
    model: Arc<OnetModel>,
    rhs_branch: usize,
    /// Products of the frozen branch outputs.
    frozen: Vec<f64>,
    inv_lumped: Vec<f64>,
    restriction: Option<CsrMatrix>,
    trunk: DenseMatrix,
}

impl DpPreconditioner {
    /// Freezes every non-residual branch at the problem's sampled inputs,
    /// looked up by branch input name in `meta`.
    pub fn new(model: Arc<OnetModel>, mesh: &StructuredMesh, meta: &ProblemMeta) -> Result<Self> {
        let rhs = model
            .rhs_branch
            .ok_or_else(|| Error::invalid("model has no right-hand-side branch for direct preconditioning"))?;
        let mut frozen = vec![1.0; model.p];
        for (l, b) in model.branches.iter().enumerate() {
            if l == rhs {
                continue;
            }
            let name = b
                .input
                .as_deref()
                .ok_or_else(|| Error::invalid(format!("branch {l} has no input name to freeze")))?;
            let field = meta
                .field(name)
                .ok_or_else(|| Error::invalid(format!("problem provides no input `{name}`")))?;
            let y = match &b.sensors {
                Some(g) if field.len() == mesh.n_nodes() => interpolation_matrix(mesh, &g.coords)?.spmv(field)?,
                _ => field.to_vec(),
            };
            let out = model.branch_eval(l, &y)?;
            frozen.iter_mut().zip(&out).for_each(|(f, o)| *f *= o);
        }
        let restriction = match &model.branches[rhs].sensors {
            Some(g) => Some(interpolation_matrix(mesh, &g.coords)?),
            None if model.branches[rhs].input_len == mesh.n_nodes() => None,
            None => {
                return Err(Error::dim("rhs branch input", mesh.n_nodes(), model.branches[rhs].input_len));
            }
        };
        let inv_lumped = lump_mass(mesh).iter().map(|m| 1.0 / m).collect();
        let trunk = model.trunk_eval(mesh.coords())?;
        Ok(Self { model, rhs_branch: rhs, frozen, inv_lumped, restriction, trunk })
    }

    /// Residual as nodal values on the branch sensors.
    pub fn restrict(&self, v: &[f64]) -> Result<Vec<f64>> {
        let nodal: Vec<f64> = v.iter().zip(&self.inv_lumped).map(|(a, b)| a * b).collect();
        match &self.restriction {
            Some(r) => r.spmv(&nodal),
            None => Ok(nodal),
        }
    }
}

impl Preconditioner for DpPreconditioner {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("DpPreconditioner::apply", self.trunk.rows(), v)?;
        let b = self.model.branch_eval(self.rhs_branch, &self.restrict(v)?)?;
        let coeffs: Vec<f64> = b.iter().zip(&self.frozen).map(|(a, f)| a * f).collect();
        self.trunk.matvec(&coeffs)
    }
    fn dim(&self) -> usize {
        self.trunk.rows()
    }
    fn is_linear(&self) -> bool {
        false
    }
    fn is_spd(&self) -> bool {
        false
    }
    fn label(&self) -> String {
        format!("dp(p={})", self.model.p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::onet::model::tests::tiny_model;
    use crate::onet::model::{Activation, Layer, SensorGrid};

    fn meta() -> ProblemMeta {
        ProblemMeta { seed: 0, theta: vec![], fields: vec![], wave_number: None }
    }

    #[test]
    fn interpolation_is_exact_on_matching_grid_and_linear_functions() {
        let mesh = StructuredMesh::new(2, 4).unwrap();
        let g = SensorGrid::uniform(vec![5, 5]).unwrap();
        let r = interpolation_matrix(&mesh, &g.coords).unwrap();
        assert_eq!(r.to_dense().sub(&DenseMatrix::identity(25)).unwrap().max_abs(), 0.0);
        let pts = [0.3, 0.71, 1.0, 0.05];
        let lin: Vec<f64> = (0..25).map(|i| 2.0 * mesh.coord(i)[0] - mesh.coord(i)[1]).collect();
        let v = interpolation_matrix(&mesh, &pts).unwrap().spmv(&lin).unwrap();
        assert!((v[0] - (0.6 - 0.71)).abs() < 1e-14 && (v[1] - 1.95).abs() < 1e-14);
        assert!(interpolation_matrix(&mesh, &[1.2, 0.0]).is_err());
    }

    #[test]
    fn zero_residual_maps_to_zero_and_restriction_is_scaling() {
        let mesh = StructuredMesh::new(1, 8).unwrap();
        let mut m = tiny_model();
        m.branches[0].input_len = 9;
        m.branches[0].sensors = Some(SensorGrid::uniform(vec![9]).unwrap());
        let mut w = vec![0.0; 36];
        w[4] = 1.0;
        m.branches[0].layers = vec![Layer::dense(9, 4, Activation::Tanh, w, vec![0.0; 4]).unwrap()];
        m.validate().unwrap();
        let dp = DpPreconditioner::new(Arc::new(m), &mesh, &meta()).unwrap();
        assert!(dp.apply(&[0.0; 9]).unwrap().iter().all(|&z| z == 0.0));
        let v: Vec<f64> = (0..9).map(|i| i as f64).collect();
        let r = dp.restrict(&v).unwrap();
        for i in 1..8 {
            assert!((r[i] - 8.0 * v[i]).abs() < 1e-12);
        }
        assert!(!dp.is_linear() && !dp.is_spd());
        let a = dp.apply(&v).unwrap();
        assert_eq!(a, dp.apply(&v).unwrap());
    }

    #[test]
    fn missing_frozen_input_is_an_error() {
        let mesh = StructuredMesh::new(1, 8).unwrap();
        let mut m = tiny_model();
        let extra = m.branches[0].clone();
        m.branches.push(Branch { input: Some("K".into()), ..extra });
        m.branches[0].input_len = 9;
        m.branches[0].layers = vec![Layer::dense(9, 4, Activation::None, vec![0.1; 36], vec![0.0; 4]).unwrap()];
        assert!(DpPreconditioner::new(Arc::new(m), &mesh, &meta()).is_err());
    }

    use crate::onet::model::Branch;
}
