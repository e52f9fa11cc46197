//! Training datasets and inspection dumps, all as TensorPack files.

use anyhow::{anyhow, ensure, Context as _, Result};
use onetprec::fem::{Problem, ProblemGenerator, ProblemSpec, StructuredMesh};
use onetprec::linalg::vector::norm2;
use onetprec::linalg::BandedLu;
use onetprec::onet::{tb_dense, tb_sparse, BasisFunctions, SineBasis, TbOptions};
use onetprec::precond::partition_structured;
use onetprec::rng::{stream, Stream};
use onetprec::{Tensor, TensorPack};

use crate::compose::ModelStore;

/// Residual bound every stored target must meet.
pub const TARGET_TOL: f64 = 1e-10;

fn rel_residual(p: &Problem, u: &[f64]) -> Result<f64> {
    let r = p.a.residual(&p.f, u)?;
    let nf = norm2(&p.f);
    Ok(if nf == 0.0 { norm2(&r) } else { norm2(&r) / nf })
}

/// `n_samples` problems from seeds `seed, seed+1, ...` with direct-solve targets.
///
/// Tensors: `seeds` [N], `coords` [n, d], `targets` [N, n] and one
/// `input/<name>` [N, len] per sampled input function.
pub fn gen_dataset(spec: &ProblemSpec, n_samples: usize, seed: u64) -> Result<TensorPack> {
    ensure!(n_samples >= 1, "need at least one sample");
    let gen = ProblemGenerator::new(spec.clone())?;
    let mesh = gen.mesh();
    let n = mesh.n_nodes();
    let mut inputs: Vec<(String, usize, Vec<f64>)> = Vec::new();
    let mut targets = Vec::with_capacity(n_samples * n);
    let seeds: Vec<u64> = (0..n_samples as u64).map(|i| seed + i).collect();
    for (j, &s) in seeds.iter().enumerate() {
        let p = gen.generate(s)?;
        let u = BandedLu::factor(&p.a)
            .and_then(|lu| lu.solve(&p.f))
            .with_context(|| format!("solving sample {j}"))?;
        let res = rel_residual(&p, &u)?;
        ensure!(res < TARGET_TOL, "sample {j}: target residual {res:e} exceeds {TARGET_TOL:e}");
        targets.extend_from_slice(&u);
        if j == 0 {
            inputs = p.meta.fields.iter().map(|f| (f.name.clone(), f.values.len(), Vec::new())).collect();
        }
        for (name, len, data) in &mut inputs {
            let v = p.meta.field(name).ok_or_else(|| anyhow!("sample {j} lacks input `{name}`"))?;
            ensure!(v.len() == *len, "sample {j}: input `{name}` changed length");
            data.extend_from_slice(v);
        }
    }
    let mut pack = TensorPack::new();
    pack.meta.insert("problem".into(), serde_json::to_value(spec)?);
    pack.meta.insert("dim".into(), mesh.dim().into());
    pack.push(Tensor::i64("seeds", vec![n_samples], seeds.iter().map(|&s| s as i64).collect())?)?;
    pack.push(Tensor::f64("coords", vec![n, mesh.dim()], mesh.coords().to_vec())?)?;
    for (name, len, data) in inputs {
        pack.push(Tensor::f64(format!("input/{name}"), vec![n_samples, len], data)?)?;
    }
    pack.push(Tensor::f64("targets", vec![n_samples, n], targets)?)?;
    Ok(pack)
}

/// Result of re-deriving every sample of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Audit {
    pub samples: usize,
    pub max_rel_residual: f64,
    /// Stored inputs differ from the regenerated ones.
    pub input_mismatches: usize,
}

impl Audit {
    pub fn ok(&self) -> bool {
        self.max_rel_residual < TARGET_TOL && self.input_mismatches == 0
    }
}

/// Regenerates every sample from the stored spec and seeds and checks the
/// stored targets against `A u = f`.
pub fn verify_dataset(pack: &TensorPack) -> Result<Audit> {
    let spec: ProblemSpec = serde_json::from_value(
        pack.meta.get("problem").cloned().ok_or_else(|| anyhow!("dataset has no problem spec"))?,
    )?;
    let tensor = |name: &str| pack.get(name).ok_or_else(|| anyhow!("dataset lacks tensor `{name}`"));
    let seeds = tensor("seeds")?.as_i64().ok_or_else(|| anyhow!("`seeds` must be int64"))?;
    let targets = tensor("targets")?;
    let t = targets.as_f64().ok_or_else(|| anyhow!("`targets` must be f64"))?;
    let gen = ProblemGenerator::new(spec)?;
    let n = gen.mesh().n_nodes();
    ensure!(targets.shape == [seeds.len(), n], "`targets` shape does not match the problem");
    let mut audit = Audit { samples: seeds.len(), max_rel_residual: 0.0, input_mismatches: 0 };
    for (j, &s) in seeds.iter().enumerate() {
        let p = gen.generate(s as u64)?;
        audit.max_rel_residual = audit.max_rel_residual.max(rel_residual(&p, &t[j * n..(j + 1) * n])?);
        for f in &p.meta.fields {
            let stored = pack.get(&format!("input/{}", f.name)).and_then(|t| t.as_f64());
            let len = f.values.len();
            if stored.and_then(|d| d.get(j * len..(j + 1) * len)) != Some(&f.values[..]) {
                audit.input_mismatches += 1;
            }
        }
    }
    Ok(audit)
}

/// System of one seed as CSR tensors.
pub fn dump_problem(spec: &ProblemSpec, seed: u64) -> Result<TensorPack> {
    let p = ProblemGenerator::new(spec.clone())?.generate(seed)?;
    let a = &p.a;
    let idx = |v: &[usize]| v.iter().map(|&i| i as i64).collect::<Vec<_>>();
    let mut pack = TensorPack::new();
    pack.meta.insert("problem".into(), serde_json::to_value(spec)?);
    pack.meta.insert("seed".into(), seed.into());
    pack.push(Tensor::i64("row_ptr", vec![a.n_rows() + 1], idx(a.row_ptr()))?)?;
    pack.push(Tensor::i64("col_idx", vec![a.nnz()], idx(a.col_idx()))?)?;
    pack.push(Tensor::f64("vals", vec![a.nnz()], a.vals().to_vec())?)?;
    pack.push(Tensor::f64("rhs", vec![a.n_rows()], p.f.clone())?)?;
    pack.push(Tensor::f64("coords", vec![p.mesh.n_nodes(), p.mesh.dim()], p.mesh.coords().to_vec())?)?;
    let mask = p.mesh.dirichlet_mask().iter().map(|&b| b as i8).collect();
    pack.push(Tensor::i8("dirichlet_mask", vec![p.mesh.n_nodes()], mask)?)?;
    Ok(pack)
}

/// What `dump-basis` writes.
#[derive(Debug, Clone)]
pub struct BasisDump {
    pub dim: usize,
    pub cells: usize,
    pub k: usize,
    /// `None` for the analytic sine basis.
    pub model: Option<String>,
    /// Block-sparse variant over this many subdomains.
    pub subdomains: Option<usize>,
    pub seed: u64,
}

/// Orthonormalized TB columns on a structured mesh (unsmoothed).
pub fn dump_basis(cfg: &BasisDump, models: &ModelStore) -> Result<TensorPack> {
    let mesh = StructuredMesh::new(cfg.dim, cfg.cells)?;
    let basis: std::sync::Arc<dyn BasisFunctions> = match &cfg.model {
        None => std::sync::Arc::new(SineBasis::new(cfg.dim, cfg.k)?),
        Some(path) => models.get(path)?,
    };
    let mut rng = stream(cfg.seed, Stream::Basis);
    let opts = TbOptions::new(cfg.k);
    let tb = match cfg.subdomains {
        None => tb_dense(basis.as_ref(), &mesh, &opts, &mut rng)?,
        Some(s) => tb_sparse(basis.as_ref(), &mesh, &partition_structured(&mesh, s, 0)?, &opts, None, &mut rng)?,
    };
    let p = tb.p.to_dense();
    let mut pack = TensorPack::new();
    pack.meta.insert("basis".into(), basis.label().into());
    pack.meta.insert("kept".into(), tb.kept.into());
    pack.push(Tensor::f64("coords", vec![mesh.n_nodes(), mesh.dim()], mesh.coords().to_vec())?)?;
    pack.push(Tensor::f64("P", vec![p.rows(), p.cols()], p.as_slice().to_vec())?)?;
    pack.push(Tensor::i64("selected", vec![tb.selected.len()], tb.selected.iter().map(|&i| i as i64).collect())?)?;
    Ok(pack)
}
