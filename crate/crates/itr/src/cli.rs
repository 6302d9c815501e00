//! Subcommands: `estimate`, `simulate`, `truth`, `generate`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use itr_core::pipeline::Estimator;
use itr_core::sim::{Scenario, Truth};
use itr_core::DgpId;
use rand_chacha::rand_core::SeedableRng;
use serde::Serialize;

use crate::config::{RunConfig, DEFAULT_SEED};
use crate::harness::{compute_truth, format_replications, format_table, Study, TruthMethod};
use crate::io::{load_dataset, write_dataset};
use crate::report::{to_json, write_json, EstimateReport, RunManifest};
use crate::Error;

#[derive(Debug, Parser)]
#[command(name = "itr", version, about = "Budget-constrained optimal treatment rules with targeted ATE inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate the optimal rule and its ATE against each reference rule.
    Estimate(EstimateArgs),
    /// Monte Carlo study on a simulation process.
    Simulate(SimulateArgs),
    /// Ground-truth ATEs of a simulation process.
    Truth(TruthArgs),
    /// Write a simulated dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Record elapsed seconds in the manifest.
    #[arg(long)]
    record_time: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpId,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the closed-form nuisance functions.
    #[arg(long)]
    oracle: bool,
    /// Overrides for the problem settings and learners.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Monte Carlo draws for the truth (default: quadrature for the
    /// parametric process, 2e6 draws otherwise).
    #[arg(long)]
    truth_samples: Option<usize>,
    /// Per-replication CSV of estimates, SEs and scaled widths.
    #[arg(long)]
    reps_out: Option<PathBuf>,
    #[arg(long)]
    record_time: bool,
}

#[derive(Debug, Args)]
struct TruthArgs {
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpId,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Midpoint quadrature instead of Monte Carlo (parametric only).
    #[arg(long)]
    quadrature: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_parser = parse_dgp)]
    dgp: DgpId,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_dgp(s: &str) -> Result<DgpId, String> {
    s.parse::<DgpId>().map_err(|_| format!("expected 'main' or 'parametric', got '{s}'"))
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let res = match cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a, out, err),
        Command::Truth(a) => truth(a, out, err),
        Command::Generate(a) => generate(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, Error> {
    std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn load_optional_config(path: Option<&Path>) -> Result<(RunConfig, Option<Vec<u8>>), Error> {
    match path {
        Some(p) => {
            let (c, bytes) = RunConfig::load(p)?;
            Ok((c, Some(bytes)))
        }
        None => Ok((RunConfig::default(), None)),
    }
}

fn estimate(a: EstimateArgs) -> Result<(), Error> {
    let start = Instant::now();
    let (cfg, cfg_bytes) = RunConfig::load(&a.config)?;
    let schema = cfg.schema.clone().ok_or_else(|| Error::Config("missing [schema] section".into()))?;
    let problem = cfg.problem.clone().ok_or_else(|| Error::Config("missing [problem] section".into()))?;
    let specs = cfg.learners.clone().unwrap_or_default().specs()?;
    let data_bytes = read_file(&a.data)?;
    let ds = load_dataset(&a.data, &schema)?;
    let mut est = Estimator::new(specs, problem.clone());
    est.fold_seed = cfg.seed();
    let run = est.run(&ds)?;

    let mut manifest = RunManifest::new("estimate", cfg.seed()).with_config(Some(&cfg_bytes));
    manifest.add_input(&a.data, &data_bytes);
    if a.record_time {
        manifest.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    }
    write_json(&a.out, &EstimateReport::new(manifest, problem, &run))
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    manifest: RunManifest,
    report: &'a itr_core::sim::SimulationReport,
}

fn simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    let start = Instant::now();
    if a.reps == 0 {
        return Err(Error::Config("reps must be ≥ 1".into()));
    }
    if a.threads == Some(0) {
        return Err(Error::Config("threads must be ≥ 1".into()));
    }
    let (cfg, cfg_bytes) = load_optional_config(a.config.as_deref())?;
    let seed = a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let scenario = Scenario::new(a.dgp, a.oracle);
    let mut study = Study::new(scenario, a.n, a.reps, seed);
    if let Some(p) = cfg.problem {
        study.estimator.cfg = p;
    }
    if let Some(l) = cfg.learners {
        if a.oracle {
            let _ = writeln!(err, "warning: --oracle ignores the [learners] section");
        } else {
            study.estimator.specs = l.specs()?;
        }
    }
    study.threads = a.threads;
    if let Some(s) = a.truth_samples {
        study.truth = TruthMethod::MonteCarlo { samples: s };
    }
    let (report, recs) = study.run()?;
    let _ = write!(out, "{}", format_table(&report));
    if let Some(p) = &a.reps_out {
        std::fs::write(p, format_replications(&recs, a.n)).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    let mut manifest = RunManifest::new("simulate", seed).with_config(cfg_bytes.as_deref());
    if a.record_time {
        manifest.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    }
    let doc = SimulateOutput {
        manifest,
        report: &report,
    };
    match &a.out {
        Some(p) => write_json(p, &doc),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct TruthOutput {
    manifest: RunManifest,
    truth: Truth,
}

fn truth(a: TruthArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Error> {
    if a.samples == 0 {
        return Err(Error::Config("samples must be ≥ 1".into()));
    }
    if a.samples < 1000 {
        let _ = writeln!(err, "warning: {} samples give a very noisy truth", a.samples);
    }
    let (cfg, cfg_bytes) = load_optional_config(a.config.as_deref())?;
    let seed = a.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let problem = cfg.problem.unwrap_or_else(|| Scenario::new(a.dgp, true).config());
    let method = if a.quadrature {
        TruthMethod::Quadrature { points: a.samples }
    } else {
        TruthMethod::MonteCarlo { samples: a.samples }
    };
    let t = compute_truth(a.dgp, &problem, method, seed)?;
    let doc = TruthOutput {
        manifest: RunManifest::new("truth", seed).with_config(cfg_bytes.as_deref()),
        truth: t,
    };
    match &a.out {
        Some(p) => write_json(p, &doc),
        None => {
            let _ = write!(out, "{}", to_json(&doc)?);
            Ok(())
        }
    }
}

fn generate(a: GenerateArgs) -> Result<(), Error> {
    if a.n == 0 {
        return Err(Error::Config("n must be ≥ 1".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(a.seed.unwrap_or(DEFAULT_SEED));
    let ds = itr_core::sim::generate(a.dgp, a.n, &mut rng);
    write_dataset(&a.out, &ds)
}
