//! Command-line front end: `generate`, `solve`, `evaluate` and `sweep`.
//!
//! Exit codes: 0 success, 2 bad configuration or arguments, 3 infeasible
//! model, 4 internal or numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::evaluation::{build_instance, compare_methods, solve_method, sweep, EvaluationError, EvaluationReport};
use crate::mdrloa::{Method, SolveError};
use crate::model::dimension_report;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "aan-offload", version, about = "Robust task offloading for UAV/HAP access networks")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single seed, replacing the configured seed list.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for multi-seed runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Number of terrestrial devices.
    #[arg(long, global = true)]
    pub tds: Option<usize>,
    /// Number of UAVs.
    #[arg(long, global = true)]
    pub uavs: Option<usize>,
    /// Devices each UAV may serve.
    #[arg(long, global = true)]
    pub quota_uav: Option<usize>,
    /// Tasks the HAP may accept.
    #[arg(long, global = true)]
    pub quota_hap: Option<usize>,
    /// History length.
    #[arg(long, global = true)]
    pub history_len: Option<usize>,
    /// Fixed L1 radius (clears any configured confidence).
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Confidence level for the radius (clears any configured tolerance).
    #[arg(long, global = true)]
    pub confidence: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the scenario snapshot and task history for a seed.
    Generate,
    /// Plan with one method and write the decision.
    Solve {
        #[arg(long, default_value = "dro")]
        method: String,
    },
    /// Compare the configured methods over all seeds.
    Evaluate,
    /// Compare the methods across values of one parameter.
    Sweep {
        /// One of Q, eps, quota-hap, quota-uav.
        #[arg(long)]
        param: Option<String>,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Internal(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Internal(_) | CliError::Io { .. } => EXIT_INTERNAL,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Infeasible(_) | SolveError::Backtrack { .. } => CliError::Infeasible(e.to_string()),
            SolveError::TooLarge { .. } | SolveError::InvalidEstimate(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::Scenario(_)
            | EvaluationError::Ambiguity(_)
            | EvaluationError::NoSeeds
            | EvaluationError::InvalidSweep(_) => CliError::Usage(e.to_string()),
            _ => CliError::Internal(e.to_string()),
        }
    }
}

/// Everything needed to reproduce a run's outputs.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub command: &'a str,
    pub config_sha256: String,
    pub seeds: &'a [u64],
    pub config: &'a RunConfig,
}

fn apply_overrides(cfg: &mut RunConfig, a: &CommonArgs) {
    if let Some(seed) = a.seed {
        cfg.experiment.seeds = vec![seed];
    }
    if let Some(out) = &a.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(j) = a.jobs {
        cfg.experiment.jobs = j;
    }
    if let Some(v) = a.tds {
        cfg.scenario.num_tds = v;
    }
    if let Some(v) = a.uavs {
        cfg.scenario.num_uavs = v;
    }
    if let Some(v) = a.quota_uav {
        cfg.scenario.quota_uav = v;
    }
    if let Some(v) = a.quota_hap {
        cfg.scenario.quota_hap = v;
    }
    if let Some(v) = a.history_len {
        cfg.ambiguity.history_len = v;
    }
    if let Some(v) = a.eps {
        cfg.ambiguity.tolerance = Some(v);
        cfg.ambiguity.confidence = None;
    }
    if let Some(v) = a.confidence {
        cfg.ambiguity.confidence = Some(v);
        cfg.ambiguity.tolerance = None;
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> Result<(), CliError> {
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_sha256: cfg.sha256(),
        seeds: &cfg.experiment.seeds,
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&m).map_err(|e| CliError::Internal(e.to_string()))?;
    write_file(&dir.join("manifest.json"), &text)
}

fn single_seed(cfg: &RunConfig) -> u64 {
    cfg.experiment.seeds[0]
}

fn write_report(dir: &Path, name: &str, report: &EvaluationReport) -> Result<(), CliError> {
    let csv = report.to_csv_string()?;
    write_file(&dir.join(format!("{name}.csv")), &csv)?;
    write_file(&dir.join("summary.json"), &report.summary_json())?;
    if report.rows.iter().all(|r| !r.feasible) {
        let first = report.rows.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(CliError::Infeasible(format!("every run failed; first error: {first}")));
    }
    Ok(())
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli.common);
    if let Command::Sweep {
        param: Some(p),
        values: Some(v),
    } = &cli.command
    {
        cfg.experiment.sweep = Some(crate::config::SweepSection {
            param: p.clone(),
            values: v.clone(),
        });
    }
    cfg.validate()?;
    let experiment = cfg.experiment_config()?;
    let dir = PathBuf::from(&cfg.output.dir);
    fs::create_dir_all(&dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })?;

    match &cli.command {
        Command::Generate => {
            let seed = single_seed(&cfg);
            let inst = build_instance(&experiment, seed)?;
            write_file(&dir.join(format!("scenario_seed{seed}.json")), &inst.scenario.to_json())?;
            if inst.histories.len() == 1 {
                write_file(&dir.join(format!("history_seed{seed}.txt")), &inst.histories[0].to_text())?;
            } else {
                for (i, h) in inst.histories.iter().enumerate() {
                    write_file(&dir.join(format!("history_seed{seed}_td{i}.txt")), &h.to_text())?;
                }
            }
            let dims = serde_json::to_string_pretty(&dimension_report(&inst.scenario))
                .map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&dir.join(format!("dimensions_seed{seed}.json")), &dims)?;
            write_manifest(&dir, "generate", &cfg)?;
            println!("wrote scenario and history for seed {seed} to {}", dir.display());
        }
        Command::Solve { method } => {
            let method: Method = method.parse().map_err(CliError::Usage)?;
            let seed = single_seed(&cfg);
            let inst = build_instance(&experiment, seed)?;
            let result = solve_method(method, &inst, &experiment.space)?;
            let text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?;
            write_file(&dir.join(format!("solve_{method}_seed{seed}.json")), &text)?;
            write_manifest(&dir, "solve", &cfg)?;
            println!(
                "{method} seed {seed}: planned latency {:.6} s, relaxation bound {:.6} s, {} LP solves",
                result.planned_latency, result.relaxation_bound, result.lp_solve_count
            );
        }
        Command::Evaluate => {
            let report = compare_methods(&experiment, &cfg.experiment.seeds, cfg.experiment.jobs)?;
            write_manifest(&dir, "evaluate", &cfg)?;
            write_report(&dir, "evaluation", &report)?;
            println!("evaluated {} runs into {}", report.rows.len(), dir.display());
        }
        Command::Sweep { .. } => {
            let sw = cfg
                .experiment
                .sweep
                .clone()
                .ok_or_else(|| CliError::Usage("sweep needs --param and --values or an [experiment.sweep] block".into()))?;
            let (param, values) = cfg.sweep_spec_from(&sw.param, &sw.values)?;
            let report = sweep(&experiment, param, &values, &cfg.experiment.seeds, cfg.experiment.jobs)?;
            write_manifest(&dir, "sweep", &cfg)?;
            write_report(&dir, "sweep", &report)?;
            println!("swept {param} over {} values into {}", values.len(), dir.display());
        }
    }
    Ok(())
}
