//! Spectral, multigrid-schedule and Schwarz-scalability studies.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{ensure, Context as _, Result};
use onetprec::fem::{ProblemGenerator, ProblemSpec};
use onetprec::krylov::StopCriteria;
use onetprec::precond::{dirichlet_modes, error_propagation_dense, mode_amplification, mode_rayleigh};
use serde::Deserialize;

use crate::compose::{self, BuildContext, ModelStore};
use crate::expr;
use crate::run::{csv_field, default_seeds, fmt_f64, mean_std, solve_seeds, RunRecord, SolverSpec};

/// Largest system the dense error-propagation capture accepts.
pub const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenConfig {
    pub problem: ProblemSpec,
    pub preconditioners: Vec<String>,
    /// Seed of the problem instance and of random basis choices.
    #[serde(default)]
    pub seed: u64,
}

/// Per-mode response of `E = I − A M` on the eigenvectors of `A`.
#[derive(Debug, Clone)]
pub struct EigenTable {
    /// Eigenvalues of the interior block of `A`, ascending.
    pub eigenvalues: Vec<f64>,
    pub labels: Vec<String>,
    /// `‖E v_j‖` per preconditioner.
    pub amplification: Vec<Vec<f64>>,
    /// `⟨v_j, E v_j⟩` per preconditioner.
    pub rayleigh: Vec<Vec<f64>>,
}

impl EigenTable {
    /// Largest amplification of preconditioner `m` over modes `range`.
    pub fn max_over(&self, m: usize, range: std::ops::Range<usize>) -> f64 {
        self.amplification[m][range].iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,eigenvalue");
        for l in &self.labels {
            let _ = write!(out, ",{},{}", csv_field(&format!("amp:{l}")), csv_field(&format!("rq:{l}")));
        }
        out.push('\n');
        for (j, lam) in self.eigenvalues.iter().enumerate() {
            let _ = write!(out, "{j},{}", fmt_f64(*lam));
            for (amp, rq) in self.amplification.iter().zip(&self.rayleigh) {
                let _ = write!(out, ",{},{}", fmt_f64(amp[j]), fmt_f64(rq[j]));
            }
            out.push('\n');
        }
        out
    }
}

pub fn eigen_study(cfg: &EigenConfig, models: &ModelStore) -> Result<EigenTable> {
    let gen = ProblemGenerator::new(cfg.problem.clone())?;
    let problem = gen.generate(cfg.seed)?;
    let n = problem.a.n_rows();
    ensure!(n <= DENSE_LIMIT, "eigen study is dense; {n} unknowns exceed {DENSE_LIMIT}");
    let (eigenvalues, modes) = dirichlet_modes(&problem.a, problem.mesh.dirichlet_mask())?;
    let a = Arc::new(problem.a.clone());
    let ctx = BuildContext { spec: &cfg.problem, mesh: &problem.mesh, a, meta: &problem.meta, models };
    let mut table = EigenTable { eigenvalues, labels: Vec::new(), amplification: Vec::new(), rayleigh: Vec::new() };
    for src in &cfg.preconditioners {
        let e = expr::parse(src)?;
        let m = compose::build(&e, &ctx, cfg.seed).with_context(|| format!("building `{e}`"))?;
        let err = error_propagation_dense(&problem.a, m.as_ref())?;
        table.amplification.push(mode_amplification(&err, &modes)?);
        table.rayleigh.push(mode_rayleigh(&err, &modes)?);
        table.labels.push(e.to_string());
    }
    Ok(table)
}

/// Iteration statistics of one preconditioner over the seeds.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub key: String,
    pub preconditioner: String,
    pub records: Vec<RunRecord>,
}

impl StudyRow {
    pub fn mean(&self) -> f64 {
        self.stats().0
    }

    pub fn stats(&self) -> (f64, f64) {
        let its: Vec<f64> = self.records.iter().map(|r| r.iterations as f64).collect();
        mean_std(&its)
    }

    pub fn converged(&self) -> usize {
        self.records.iter().filter(|r| r.termination.converged()).count()
    }
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("key,preconditioner,mean_iterations,std_iterations,converged,runs\n");
    for r in rows {
        let (m, s) = r.stats();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&r.key),
            csv_field(&r.preconditioner),
            fmt_f64(m),
            fmt_f64(s),
            r.converged(),
            r.records.len()
        );
    }
    out
}

/// Shared part of the sweep configurations.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub stop: Option<StopCriteria>,
    /// Multigrid study: one `mg(...)` expression per schedule.
    #[serde(default)]
    pub schedules: Vec<String>,
    /// Schwarz study: subdomain counts substituted for `{S}` in `variants`.
    #[serde(default)]
    pub subdomains: Vec<usize>,
    #[serde(default)]
    pub variants: Vec<String>,
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        ensure!(!cfg.seeds.is_empty(), "`seeds` must not be empty");
        Ok(cfg)
    }

    fn stop(&self) -> StopCriteria {
        self.stop.unwrap_or_else(|| StopCriteria::for_problem(self.problem.is_indefinite()))
    }

    fn sweep(&self, runs: Vec<(String, String)>, models: &ModelStore) -> Result<Vec<StudyRow>> {
        let stop = self.stop();
        runs.into_iter()
            .map(|(key, src)| {
                let e = expr::parse(&src)?;
                let records = solve_seeds(&self.problem, &e, self.solver, &stop, &self.seeds, models)?;
                Ok(StudyRow { key, preconditioner: e.to_string(), records })
            })
            .collect()
    }
}

/// One row per schedule, keyed by level count.
pub fn mg_study(cfg: &SweepConfig, models: &ModelStore) -> Result<Vec<StudyRow>> {
    ensure!(!cfg.schedules.is_empty(), "mg study needs `schedules`");
    let runs = cfg
        .schedules
        .iter()
        .map(|s| {
            let levels = expr::parse(s)?
                .args
                .first()
                .map(|a| a.value.to_string())
                .unwrap_or_default();
            Ok((format!("levels={levels}"), s.clone()))
        })
        .collect::<Result<_>>()?;
    cfg.sweep(runs, models)
}

/// One row per (subdomain count, variant).
pub fn asm_study(cfg: &SweepConfig, models: &ModelStore) -> Result<Vec<StudyRow>> {
    ensure!(!cfg.subdomains.is_empty() && !cfg.variants.is_empty(), "asm study needs `subdomains` and `variants`");
    let mut runs = Vec::new();
    for (v, template) in cfg.variants.iter().enumerate() {
        for &s in &cfg.subdomains {
            runs.push((format!("S={s};variant={v}"), template.replace("{S}", &s.to_string())));
        }
    }
    cfg.sweep(runs, models)
}

#[cfg(test)]
mod tests {
    use onetprec::fem::ProblemKind;

    use super::*;

    #[test]
    fn exact_inverse_amplifies_nothing() {
        let cfg = EigenConfig {
            problem: ProblemSpec::new(ProblemKind::Helm1D { k_h: 10.0, f_sigma: 1.0, f_ell: 0.1 }).with_cells(40),
            preconditioners: vec!["exact".into(), "jacobi(1, gamma=auto)".into()],
            seed: 0,
        };
        let t = eigen_study(&cfg, &ModelStore::default()).unwrap();
        assert_eq!(t.eigenvalues.len(), 39);
        assert!(t.max_over(0, 0..39) < 1e-10);
        assert!(t.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 40);
        assert!(csv.starts_with("mode,eigenvalue,amp:exact,rq:exact,\"amp:jacobi(1,gamma=auto)\""));
    }

    #[test]
    fn too_large_for_dense_capture() {
        let cfg = EigenConfig {
            problem: ProblemSpec::new(ProblemKind::Poisson { dim: 1, f_ell: 0.1 }).with_cells(700),
            preconditioners: vec!["jacobi".into()],
            seed: 0,
        };
        assert!(eigen_study(&cfg, &ModelStore::default()).is_err());
    }

    #[test]
    fn asm_variants_expand_over_subdomains() {
        let cfg: SweepConfig = toml::from_str(
            r#"
            seeds = [0]
            solver = { kind = "pcg" }
            subdomains = [2, 4]
            variants = ["asm({S}, 1)"]
            problem = { variant = "Poisson", dim = 1, cells = 31 }
            "#,
        )
        .unwrap();
        let rows = asm_study(&cfg, &ModelStore::default()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].preconditioner, "asm(4,1)");
        assert_eq!(rows[0].converged(), 1);
        assert!(study_csv(&rows).starts_with("key,preconditioner,"));
    }
}
