use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use onetprec::fem::ProblemSpec;
use onetprec::TensorPack;
use onetprec_cli::compose::config_dir;
use onetprec_cli::dataset::{self, BasisDump};
use onetprec_cli::run::{self, RunConfig};
use onetprec_cli::studies::{self, EigenConfig, SweepConfig};
use onetprec_cli::ModelStore;

#[derive(Parser)]
#[command(name = "onetprec", version, about = "Hybrid DeepONet/iterative preconditioner experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one problem family over several seeds and report iterations as CSV.
    Solve {
        config: PathBuf,
        /// Overrides `output` in the config; `-` for stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sample problems and store direct-solve targets for training.
    GenDataset {
        /// TOML file holding a problem spec.
        problem: PathBuf,
        #[arg(short = 'n', long, default_value_t = 2500)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Re-derive every sample of a dataset and check its targets.
    VerifyDataset { dataset: PathBuf },
    /// Per-mode amplification of I - AM for each configured preconditioner.
    EigenStudy {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// GMRES iterations per multigrid smoothing schedule.
    MgStudy {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Krylov iterations of Schwarz variants over subdomain counts.
    AsmStudy {
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Write orthonormalized trunk-basis columns on a mesh.
    DumpBasis {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long)]
        cells: usize,
        #[arg(short, long)]
        k: usize,
        /// ONetPack model; the analytic sine basis when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Block-sparse variant over this many subdomains.
        #[arg(long)]
        subdomains: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the assembled system of one seed in CSR form.
    DumpProblem {
        problem: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) if p != Path::new("-") => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_problem(path: &Path) -> Result<ProblemSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn study_rows_converged(rows: &[studies::StudyRow]) -> bool {
    rows.iter().all(|r| r.converged() == r.records.len())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when some run did not converge.
fn real_main() -> Result<bool> {
    match Cli::parse().cmd {
        Cmd::Solve { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let models = ModelStore::new(config_dir(&config));
            let records = run::run(&cfg, &models)?;
            write_text(out.as_deref().or(cfg.output.as_deref()), &run::to_csv(&records))?;
            Ok(run::all_converged(&records))
        }
        Cmd::GenDataset { problem, samples, seed, out } => {
            let pack = dataset::gen_dataset(&load_problem(&problem)?, samples, seed)?;
            pack.save(&out)?;
            eprintln!("wrote {samples} samples to {}", out.display());
            Ok(true)
        }
        Cmd::VerifyDataset { dataset: path } => {
            let audit = dataset::verify_dataset(&TensorPack::load(&path)?)?;
            println!(
                "samples={} max_rel_residual={} input_mismatches={}",
                audit.samples,
                run::fmt_f64(audit.max_rel_residual),
                audit.input_mismatches
            );
            Ok(audit.ok())
        }
        Cmd::EigenStudy { config, out } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let cfg: EigenConfig = toml::from_str(&text)?;
            let table = studies::eigen_study(&cfg, &ModelStore::new(config_dir(&config)))?;
            write_text(out.as_deref(), &table.to_csv())?;
            Ok(true)
        }
        Cmd::MgStudy { config, out } => {
            let rows = studies::mg_study(&SweepConfig::load(&config)?, &ModelStore::new(config_dir(&config)))?;
            write_text(out.as_deref(), &studies::study_csv(&rows))?;
            Ok(study_rows_converged(&rows))
        }
        Cmd::AsmStudy { config, out } => {
            let rows = studies::asm_study(&SweepConfig::load(&config)?, &ModelStore::new(config_dir(&config)))?;
            write_text(out.as_deref(), &studies::study_csv(&rows))?;
            Ok(study_rows_converged(&rows))
        }
        Cmd::DumpBasis { dim, cells, k, model, subdomains, seed, out } => {
            let cfg = BasisDump {
                dim,
                cells,
                k,
                model: model.map(|m| m.to_string_lossy().into_owned()),
                subdomains,
                seed,
            };
            dataset::dump_basis(&cfg, &ModelStore::default())?.save(&out)?;
            Ok(true)
        }
        Cmd::DumpProblem { problem, seed, out } => {
            dataset::dump_problem(&load_problem(&problem)?, seed)?.save(&out)?;
            Ok(true)
        }
    }
}
