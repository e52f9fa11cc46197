//! Run configuration, per-seed solves and the CSV report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{ensure, Context as _, Result};
use onetprec::fem::{Problem, ProblemGenerator, ProblemSpec};
use onetprec::krylov::{fgmres, pcg, FgmresOptions, SolveReport, StopCriteria, Termination};
use onetprec::precond::SharedPrec;
use onetprec::rng::initial_guess;
use serde::Deserialize;

use crate::compose::{self, BuildContext, ModelStore};
use crate::expr::{self, Expr};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SolverSpec {
    Pcg,
    Fgmres {
        #[serde(default = "default_restart")]
        restart: usize,
        #[serde(default)]
        reorthogonalize: bool,
    },
}

fn default_restart() -> usize {
    50
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec::Fgmres { restart: default_restart(), reorthogonalize: false }
    }
}

pub fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

/// A `solve` run: one problem family, one preconditioner, several seeds.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_prec")]
    pub preconditioner: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Overrides of the default stopping rule; the A-norm test is dropped
    /// for indefinite problems unless given explicitly.
    #[serde(default)]
    pub stop: Option<StopCriteria>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_prec() -> String {
    "identity".into()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        ensure!(!cfg.seeds.is_empty(), "`seeds` must not be empty");
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn stop(&self) -> StopCriteria {
        self.stop.unwrap_or_else(|| StopCriteria::for_problem(self.problem.is_indefinite()))
    }
}

/// Outcome of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub problem: String,
    pub preconditioner: String,
    pub iterations: usize,
    pub termination: Termination,
    pub final_rel_res: f64,
}

/// Problem and preconditioner of one seed, built before any solve so
/// configuration errors surface early.
struct Prepared {
    seed: u64,
    problem: Problem,
    prec: SharedPrec,
}

/// Solves `expr` on every seed. All preconditioners are built and
/// type-checked against the solver first.
pub fn solve_seeds(
    spec: &ProblemSpec,
    expr: &Expr,
    solver: SolverSpec,
    stop: &StopCriteria,
    seeds: &[u64],
    models: &ModelStore,
) -> Result<Vec<RunRecord>> {
    let gen = ProblemGenerator::new(spec.clone())?;
    let mut prepared = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let problem = gen.generate(seed)?;
        let a = Arc::new(problem.a.clone());
        let ctx = BuildContext { spec, mesh: &problem.mesh, a, meta: &problem.meta, models };
        let prec = compose::build(expr, &ctx, seed).with_context(|| format!("building `{expr}` for seed {seed}"))?;
        if solver == SolverSpec::Pcg {
            ensure!(
                prec.is_linear() && prec.is_spd(),
                "pcg needs a linear SPD preconditioner, `{expr}` is not (use fgmres)"
            );
        }
        prepared.push(Prepared { seed, problem, prec });
    }
    let label = format!("{}[{}]", spec.name(), gen.mesh().n_nodes());
    prepared
        .into_iter()
        .map(|p| {
            let report = solve_one(&p.problem, p.prec.as_ref(), solver, stop, p.seed)?;
            Ok(RunRecord {
                seed: p.seed,
                problem: label.clone(),
                preconditioner: expr.to_string(),
                iterations: report.iterations,
                termination: report.termination,
                final_rel_res: report.final_rel_res(),
            })
        })
        .collect()
}

pub fn solve_one(
    problem: &Problem,
    prec: &dyn onetprec::Preconditioner,
    solver: SolverSpec,
    stop: &StopCriteria,
    seed: u64,
) -> Result<SolveReport> {
    let x0 = initial_guess(seed, problem.a.n_rows());
    Ok(match solver {
        SolverSpec::Pcg => pcg(&problem.a, &problem.f, prec, &x0, stop)?,
        SolverSpec::Fgmres { restart, reorthogonalize } => {
            let opts = FgmresOptions { restart, reorthogonalize, capture: false };
            fgmres(&problem.a, &problem.f, prec, &x0, stop, &opts)?.0
        }
    })
}

pub fn run(cfg: &RunConfig, models: &ModelStore) -> Result<Vec<RunRecord>> {
    let expr = expr::parse(&cfg.preconditioner)?;
    solve_seeds(&cfg.problem, &expr, cfg.solver, &cfg.stop(), &cfg.seeds, models)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Fixed 17-significant-digit float formatting.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const CSV_HEADER: &str = "seed,problem,preconditioner,iterations,termination,final_rel_res";

/// One row per seed plus a `mean±std` aggregate row.
pub fn to_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            r.problem,
            csv_field(&r.preconditioner),
            r.iterations,
            r.termination,
            fmt_f64(r.final_rel_res)
        );
    }
    if let Some(first) = records.first() {
        let its: Vec<f64> = records.iter().map(|r| r.iterations as f64).collect();
        let (mean, std) = mean_std(&its);
        let converged = records.iter().filter(|r| r.termination.converged()).count();
        let worst = records.iter().map(|r| r.final_rel_res).fold(0.0, f64::max);
        let _ = writeln!(
            out,
            "mean±std,{},{},{mean:.1} ± {std:.1},converged {converged}/{},{}",
            first.problem,
            csv_field(&first.preconditioner),
            records.len(),
            fmt_f64(worst)
        );
    }
    out
}

/// Quotes fields that contain separators.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn all_converged(records: &[RunRecord]) -> bool {
    records.iter().all(|r| r.termination.converged())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = r#"
        preconditioner = "identity"
        seeds = [0, 1, 2]
        [problem]
        variant = "Identity"
        n = 12
    "#;

    #[test]
    fn identity_stub_takes_one_iteration() {
        let cfg = RunConfig::from_toml(IDENTITY).unwrap();
        let recs = run(&cfg, &ModelStore::default()).unwrap();
        assert!(recs.iter().all(|r| r.iterations == 1 && r.termination.converged()));
        let csv = to_csv(&recs);
        assert!(csv.lines().last().unwrap().starts_with("mean±std,Identity[12],identity,1.0 ± 0.0,converged 3/3,"));
    }

    #[test]
    fn pcg_rejects_nonsymmetric_composites() {
        let cfg = RunConfig::from_toml(
            r#"
            preconditioner = "mult(jacobi, tb_coarse(4))"
            seeds = [0]
            solver = { kind = "pcg" }
            problem = { variant = "Poisson", dim = 1, cells = 32 }
            "#,
        )
        .unwrap();
        let err = run(&cfg, &ModelStore::default()).unwrap_err();
        assert!(err.to_string().contains("pcg needs"), "{err}");
    }

    #[test]
    fn config_rejects_unknown_keys_and_empty_seeds() {
        assert!(RunConfig::from_toml("preconditioner='identity'\nbogus=1\n[problem]\nvariant='Identity'\nn=4").is_err());
        assert!(RunConfig::from_toml("seeds=[]\n[problem]\nvariant='Identity'\nn=4").is_err());
    }

    #[test]
    fn statistics_and_formatting() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
