//! Turns a parsed expression into a preconditioner for one problem instance.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, ensure, Context, Result};
use onetprec::fem::{assemble_diffusion, assemble_helmholtz, ProblemKind, ProblemMeta, ProblemSpec, StructuredMesh};
use onetprec::linalg::CsrMatrix;
use onetprec::onet::{tb_dense, tb_sparse, BasisFunctions, CoarseSpace, DpPreconditioner, OnetModel, SineBasis, TbOptions};
use onetprec::precond::{
    geometric_levels, jacobi_gamma_helmholtz, partition_structured, Asm, Composite, CompositionMode, ExactInverse,
    Identity, Jacobi, LevelSmoother, MgHierarchy, MgLevel, SharedPrec,
};
use onetprec::rng::{stream, Stream, StreamRng};

use crate::expr::{Arg, Expr, Value};

/// Loaded models, keyed by canonical path; shared across seeds.
#[derive(Default)]
pub struct ModelStore {
    base: PathBuf,
    models: Mutex<HashMap<PathBuf, Arc<OnetModel>>>,
}

impl ModelStore {
    /// Relative model paths resolve against `base`.
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self { base: base.into(), models: Mutex::default() }
    }

    pub fn get(&self, path: &str) -> Result<Arc<OnetModel>> {
        let p = self.base.join(path);
        let mut cache = self.models.lock().expect("model cache poisoned");
        if let Some(m) = cache.get(&p) {
            return Ok(m.clone());
        }
        let m = Arc::new(OnetModel::load(&p).with_context(|| format!("loading model {}", p.display()))?);
        cache.insert(p, m.clone());
        Ok(m)
    }
}

/// Everything a preconditioner may be built from.
pub struct BuildContext<'a> {
    pub spec: &'a ProblemSpec,
    pub mesh: &'a StructuredMesh,
    pub a: Arc<CsrMatrix>,
    pub meta: &'a ProblemMeta,
    pub models: &'a ModelStore,
}

/// Builds `expr`; random TB column choices come from the run's basis stream.
pub fn build(expr: &Expr, ctx: &BuildContext, seed: u64) -> Result<SharedPrec> {
    let mut rng = stream(seed, Stream::Basis);
    let level = Level { mesh: ctx.mesh.clone(), a: ctx.a.clone() };
    Builder { ctx, rng: &mut rng }.build(expr, &level)
}

/// Operator and mesh a sub-expression acts on (differs from the problem's
/// inside multigrid levels).
#[derive(Clone)]
struct Level {
    mesh: StructuredMesh,
    a: Arc<CsrMatrix>,
}

struct Builder<'c, 'r> {
    ctx: &'c BuildContext<'c>,
    rng: &'r mut StreamRng,
}

/// Positional and keyword arguments of one call, consumed by name.
struct Args<'e> {
    call: &'e str,
    positional: Vec<&'e Value>,
    named: Vec<(&'e str, &'e Value)>,
    next: usize,
}

impl<'e> Args<'e> {
    fn new(e: &'e Expr) -> Result<Self> {
        let mut positional = Vec::new();
        let mut named = Vec::new();
        for Arg { key, value } in &e.args {
            match key {
                Some(k) => named.push((k.as_str(), value)),
                None if named.is_empty() => positional.push(value),
                None => bail!("{}: positional argument after keyword arguments", e.name),
            }
        }
        Ok(Self { call: &e.name, positional, named, next: 0 })
    }

    /// Next positional argument, or the keyword argument under any of `keys`.
    fn take(&mut self, keys: &[&str]) -> Option<&'e Value> {
        if let Some(i) = self.named.iter().position(|(k, _)| keys.contains(k)) {
            return Some(self.named.remove(i).1);
        }
        let v = self.positional.get(self.next).copied();
        if v.is_some() {
            self.next += 1;
        }
        v
    }

    fn num(&mut self, keys: &[&str]) -> Result<Option<f64>> {
        match self.take(keys) {
            None => Ok(None),
            Some(Value::Num(x)) => Ok(Some(*x)),
            Some(v) => bail!("{}: `{}` must be a number, got {v}", self.call, keys[0]),
        }
    }

    fn count(&mut self, keys: &[&str]) -> Result<Option<usize>> {
        match self.num(keys)? {
            Some(x) if x >= 0.0 && x.fract() == 0.0 => Ok(Some(x as usize)),
            Some(x) => bail!("{}: `{}` must be a non-negative integer, got {x}", self.call, keys[0]),
            None => Ok(None),
        }
    }

    fn required(&mut self, keys: &[&str]) -> Result<usize> {
        self.count(keys)?.ok_or_else(|| anyhow!("{}: missing `{}`", self.call, keys[0]))
    }

    fn word(&mut self, keys: &[&str]) -> Result<Option<&'e str>> {
        match self.take(keys) {
            None => Ok(None),
            Some(v) => v.as_word().map(Some).ok_or_else(|| anyhow!("{}: `{}` must be a word or string", self.call, keys[0])),
        }
    }

    fn finish(self) -> Result<()> {
        ensure!(self.next == self.positional.len(), "{}: too many positional arguments", self.call);
        if let Some((k, _)) = self.named.first() {
            bail!("{}: unknown argument `{k}`", self.call);
        }
        Ok(())
    }
}

impl Builder<'_, '_> {
    fn build(&mut self, e: &Expr, lv: &Level) -> Result<SharedPrec> {
        let n = lv.a.n_rows();
        let prec: SharedPrec = match e.name.as_str() {
            "identity" => {
                Args::new(e)?.finish()?;
                Arc::new(Identity::new(n))
            }
            "exact" => {
                Args::new(e)?.finish()?;
                Arc::new(ExactInverse::new(&lv.a)?)
            }
            "jacobi" => {
                let mut args = Args::new(e)?;
                let steps = args.count(&["nu", "ν", "steps"])?.unwrap_or(1);
                let gamma = self.gamma(&mut args, &lv.mesh)?;
                args.finish()?;
                Arc::new(Jacobi::new(lv.a.clone(), gamma, steps)?)
            }
            "mult" | "add" => {
                let mode = if e.name == "mult" { CompositionMode::Multiplicative } else { CompositionMode::Additive };
                let mut parts = Vec::new();
                let mut weights = None;
                for arg in &e.args {
                    match (&arg.key, &arg.value) {
                        (None, Value::Call(sub)) => parts.push(self.build(sub, lv)?),
                        (Some(k), Value::Str(w)) if k == "weights" => weights = Some(parse_weights(w)?),
                        (Some(k), Value::Num(w)) if k == "weights" => weights = Some(vec![*w]),
                        _ => bail!("{}: arguments must be preconditioners or `weights=\"..\"`", e.name),
                    }
                }
                let weights = weights.unwrap_or_else(|| vec![1.0; parts.len()]);
                ensure!(weights.len() == parts.len(), "{}: {} weights for {} parts", e.name, weights.len(), parts.len());
                Arc::new(Composite::new(lv.a.clone(), parts.into_iter().zip(weights).collect(), mode)?)
            }
            "asm" => {
                let mut args = Args::new(e)?;
                let s = args.required(&["S", "s", "subdomains"])?;
                let overlap = args.count(&["overlap", "o"])?.unwrap_or(1);
                args.finish()?;
                Arc::new(Asm::new(&lv.a, &partition_structured(&lv.mesh, s, overlap)?)?)
            }
            "tb_coarse" => {
                let mut args = Args::new(e)?;
                let k = args.required(&["k"])?;
                let basis = self.basis(&mut args, k, lv.mesh.dim())?;
                let opts = tb_options(&mut args, k)?;
                args.finish()?;
                let tb = tb_dense(basis.as_ref(), &lv.mesh, &opts, self.rng)?;
                Arc::new(CoarseSpace::new(&lv.a, tb.p, format!("tb_coarse(k={k})"))?)
            }
            "tb_sparse" => {
                let mut args = Args::new(e)?;
                let k = args.required(&["k"])?;
                let s = args.required(&["S", "s", "subdomains"])?;
                let smoothing = match args.take(&["smooth", "gamma", "γ"]) {
                    None => Some(2.0 / 3.0),
                    Some(Value::Num(g)) => Some(*g),
                    Some(v) if v.as_word() == Some("none") => None,
                    Some(v) => bail!("tb_sparse: `smooth` must be a number or `none`, got {v}"),
                };
                let basis = self.basis(&mut args, k, lv.mesh.dim())?;
                let opts = tb_options(&mut args, k)?;
                args.finish()?;
                let part = partition_structured(&lv.mesh, s, 0)?;
                let tb = tb_sparse(basis.as_ref(), &lv.mesh, &part, &opts, smoothing.map(|g| (lv.a.as_ref(), g)), self.rng)?;
                Arc::new(CoarseSpace::new(&lv.a, tb.p, format!("tb_sparse(k={k},S={s})"))?)
            }
            "mg" => self.multigrid(e, lv)?,
            "dp" => {
                let mut args = Args::new(e)?;
                let path = args.word(&["model"])?.ok_or_else(|| anyhow!("dp: missing model path"))?;
                args.finish()?;
                ensure!(lv.a.n_rows() == self.ctx.mesh.n_nodes(), "dp is only available on the problem level");
                Arc::new(DpPreconditioner::new(self.ctx.models.get(path)?, &lv.mesh, self.ctx.meta)?)
            }
            other => bail!("unknown preconditioner `{other}`"),
        };
        ensure!(prec.dim() == n, "{} has dimension {} on a level of size {n}", e.name, prec.dim());
        Ok(prec)
    }

    /// `gamma=auto` picks the wave-number dependent damping, 2/3 for `k_H = 0`.
    fn gamma(&self, args: &mut Args, mesh: &StructuredMesh) -> Result<f64> {
        match args.take(&["gamma", "γ"]) {
            Some(Value::Num(g)) => Ok(*g),
            Some(v) if v.as_word() != Some("auto") => bail!("jacobi: `gamma` must be a number or `auto`, got {v}"),
            _ => {
                let k = self.ctx.spec.wave_number()?.unwrap_or(0.0);
                Ok(jacobi_gamma_helmholtz(k, mesh.h())?)
            }
        }
    }

    /// `basis=sine` (default) uses `p` analytic sine modes, anything else is
    /// an ONetPack path.
    fn basis(&self, args: &mut Args, k: usize, dim: usize) -> Result<Arc<dyn BasisFunctions>> {
        let p = args.count(&["p"])?;
        match args.word(&["basis"])?.unwrap_or("sine") {
            "sine" => Ok(Arc::new(SineBasis::new(dim, p.unwrap_or(k))?)),
            path => {
                ensure!(p.is_none(), "`p` is fixed by the model");
                let m = self.ctx.models.get(path)?;
                Ok(m as Arc<dyn BasisFunctions>)
            }
        }
    }

    /// `mg(levels, schedule="J,J,M(24),D", nu=3, galerkin=false)`, finest first.
    fn multigrid(&mut self, e: &Expr, lv: &Level) -> Result<SharedPrec> {
        let mut args = Args::new(e)?;
        let n_levels = args.required(&["levels", "L"])?;
        ensure!(n_levels >= 1, "mg: need at least one level");
        let schedule = match args.word(&["schedule"])? {
            Some(s) => s.split(',').map(|t| t.trim().to_string()).collect(),
            None => {
                let mut s = vec!["J".to_string(); n_levels - 1];
                s.push("D".into());
                s
            }
        };
        let nu = args.count(&["nu", "ν"])?.unwrap_or(3);
        let galerkin = match args.word(&["galerkin"])? {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => bail!("mg: `galerkin` must be true or false, got {v}"),
        };
        args.finish()?;
        ensure!(
            schedule.len() == n_levels,
            "mg: schedule has {} entries for {n_levels} levels",
            schedule.len()
        );
        let rediscretize = |m: &StructuredMesh| self.rediscretize(m, &lv.mesh);
        let levels = geometric_levels(&lv.mesh, n_levels, galerkin, rediscretize)?;
        let mut out = Vec::with_capacity(n_levels);
        for (geo, entry) in levels.into_iter().zip(&schedule) {
            let sub = Level { mesh: geo.mesh.clone(), a: geo.a.clone() };
            let smoother = match parse_entry(entry)? {
                Entry::Direct => LevelSmoother::Direct,
                Entry::Jacobi(steps) => LevelSmoother::Smoother(self.build(&jacobi_expr(steps.unwrap_or(nu)), &sub)?),
                Entry::Composite(k) => {
                    let m = Expr {
                        name: "mult".into(),
                        args: vec![
                            call(jacobi_expr(nu)),
                            call(Expr { name: "tb_coarse".into(), args: vec![Arg { key: Some("k".into()), value: Value::Num(k as f64) }] }),
                        ],
                    };
                    LevelSmoother::Smoother(self.build(&m, &sub)?)
                }
                Entry::Expr(x) => LevelSmoother::Smoother(self.build(&x, &sub)?),
            };
            out.push(MgLevel { a: geo.a, smoother, prolongation: geo.prolongation });
        }
        Ok(Arc::new(MgHierarchy::new(out, galerkin)?))
    }

    /// Operator of the problem family on a coarser mesh.
    fn rediscretize(&self, coarse: &StructuredMesh, fine: &StructuredMesh) -> onetprec::Result<CsrMatrix> {
        if coarse == fine {
            return Ok(self.ctx.a.as_ref().clone());
        }
        match &self.ctx.spec.kind {
            ProblemKind::Helm1D { .. } | ProblemKind::Helm2D { .. } => {
                let k = self.ctx.spec.wave_number()?.unwrap_or(0.0);
                assemble_helmholtz(coarse, k, true)
            }
            ProblemKind::Diff { .. } | ProblemKind::JumpDiff { .. } => {
                let k = self.ctx.meta.field("K").ok_or_else(|| onetprec::Error::InvalidArgument("problem has no `K` field".into()))?;
                assemble_diffusion(coarse, &inject(fine, coarse, k))
            }
            ProblemKind::Poisson { .. } => assemble_diffusion(coarse, &vec![1.0; coarse.n_nodes()]),
            ProblemKind::Identity { .. } => Ok(CsrMatrix::identity(coarse.n_nodes())),
        }
    }
}

enum Entry {
    Direct,
    Jacobi(Option<usize>),
    Composite(usize),
    Expr(Expr),
}

/// `D`, `J`, `J(5)`, `M(24)` or a full preconditioner expression.
fn parse_entry(s: &str) -> Result<Entry> {
    let e = crate::expr::parse(s)?;
    let single = |e: &Expr| -> Result<usize> {
        match e.args.as_slice() {
            [Arg { key: None, value: Value::Num(x) }] if *x >= 1.0 && x.fract() == 0.0 => Ok(*x as usize),
            _ => bail!("schedule entry `{s}` takes a single positive integer"),
        }
    };
    Ok(match e.name.as_str() {
        "D" if e.args.is_empty() => Entry::Direct,
        "J" if e.args.is_empty() => Entry::Jacobi(None),
        "J" => Entry::Jacobi(Some(single(&e)?)),
        "M" => Entry::Composite(single(&e)?),
        _ => Entry::Expr(e),
    })
}

fn jacobi_expr(steps: usize) -> Expr {
    Expr {
        name: "jacobi".into(),
        args: vec![
            Arg { key: Some("nu".into()), value: Value::Num(steps as f64) },
            Arg { key: Some("gamma".into()), value: Value::Str("auto".into()) },
        ],
    }
}

fn call(e: Expr) -> Arg {
    Arg { key: None, value: Value::Call(e) }
}

fn tb_options(args: &mut Args, k: usize) -> Result<TbOptions> {
    let mut opts = TbOptions::new(k);
    if let Some(eps) = args.num(&["eps", "ε"])? {
        ensure!(eps > 0.0, "`eps` must be positive");
        opts.eps_rel = eps;
    }
    Ok(opts)
}

fn parse_weights(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|w| w.trim().parse::<f64>().with_context(|| format!("bad weight `{w}`")))
        .collect()
}

/// Nodal values of a nested fine mesh sampled at the coarse nodes.
fn inject(fine: &StructuredMesh, coarse: &StructuredMesh, values: &[f64]) -> Vec<f64> {
    let ratio = fine.cells_per_axis() / coarse.cells_per_axis();
    (0..coarse.n_nodes())
        .map(|i| {
            let mut idx = coarse.node_index(i);
            idx.iter_mut().take(coarse.dim()).for_each(|v| *v *= ratio);
            values[fine.node_at(idx)]
        })
        .collect()
}

/// Resolves a model path against the directory of `config`.
pub fn config_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use onetprec::fem::{ProblemGenerator, ProblemKind};
    use onetprec::precond::error_propagation_dense;

    use super::*;
    use crate::expr::parse;

    fn poisson(cells: usize) -> (ProblemSpec, onetprec::Problem) {
        let spec = ProblemSpec::new(ProblemKind::Poisson { dim: 1, f_ell: 0.1 }).with_cells(cells);
        let p = ProblemGenerator::new(spec.clone()).unwrap().generate(0).unwrap();
        (spec, p)
    }

    fn make(src: &str, spec: &ProblemSpec, p: &onetprec::Problem) -> Result<SharedPrec> {
        let store = ModelStore::default();
        let ctx = BuildContext { spec, mesh: &p.mesh, a: Arc::new(p.a.clone()), meta: &p.meta, models: &store };
        build(&parse(src)?, &ctx, 0)
    }

    #[test]
    fn builds_every_kind() {
        let (spec, p) = poisson(32);
        for src in [
            "identity",
            "exact",
            "jacobi(3, gamma=auto)",
            "mult(jacobi, tb_coarse(4), jacobi)",
            "add(asm(4, overlap=2), tb_sparse(k=2, S=4), weights=\"1,0.5\")",
            "mg(3)",
            "mg(4, schedule=\"J(2),M(4),J,D\", galerkin=true)",
            "mg(2, schedule=\"asm(2),D\")",
        ] {
            let m = make(src, &spec, &p).unwrap_or_else(|e| panic!("{src}: {e:#}"));
            assert_eq!(m.dim(), 33, "{src}");
            assert!(m.is_linear());
        }
        assert!(make("mult(jacobi, tb_coarse(4), jacobi)", &spec, &p).unwrap().is_spd());
    }

    #[test]
    fn rejects_bad_configs() {
        let (spec, p) = poisson(32);
        for src in ["nope", "jacobi(1, 2, 3)", "asm()", "mg(3, schedule=\"J,D\")", "mg(2, schedule=\"D,J\")", "jacobi(foo=1)"] {
            assert!(make(src, &spec, &p).is_err(), "{src}");
        }
    }

    #[test]
    fn auto_gamma_is_two_thirds_without_wave_number() {
        let (spec, p) = poisson(16);
        let a = make("jacobi(1, gamma=auto)", &spec, &p).unwrap();
        let b = make("jacobi(1, gamma=2/3)", &spec, &p).unwrap();
        let ea = error_propagation_dense(&p.a, a.as_ref()).unwrap();
        let eb = error_propagation_dense(&p.a, b.as_ref()).unwrap();
        assert_eq!(ea.sub(&eb).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn injection_samples_coincident_nodes() {
        let fine = StructuredMesh::new(2, 8).unwrap();
        let coarse = StructuredMesh::new(2, 4).unwrap();
        let vals: Vec<f64> = (0..fine.n_nodes()).map(|i| fine.coord(i)[0] + 10.0 * fine.coord(i)[1]).collect();
        let c = inject(&fine, &coarse, &vals);
        for i in 0..coarse.n_nodes() {
            let x = coarse.coord(i);
            assert!((c[i] - (x[0] + 10.0 * x[1])).abs() < 1e-14);
        }
    }
}
