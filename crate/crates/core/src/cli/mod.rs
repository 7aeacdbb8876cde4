//! Command-line front end: `kerr-blockade <command> --config FILE --out DIR`.
//!
//! Every command writes `<command>.csv` and `<command>.summary.json` into the
//! output directory. Exit status is 0 when all checks pass, 2 when the run
//! finished but a check failed, 1 on error (with an error record on stdout).

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use commands::PointOutput;
use config::RunConfig;
use output::{Checks, Summary, Table};

#[derive(Parser, Debug)]
#[command(name = "kerr-blockade", version, about = "Displaced-frame Kerr photon blockade simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: fig3, fig4, fig6, fig1c, figS1.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, value_name = "N")]
    pub workers: Option<usize>,
    /// RNG seed for the Monte-Carlo channel check.
    #[arg(long, value_name = "N", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lab-frame drives for target displaced-frame parameters.
    Tune(Common),
    /// Master-equation time series.
    Evolve(Common),
    /// Stationary state.
    Steady(Common),
    /// Dissipative gap and slow mode.
    Spectrum(Common),
    /// Mean-field fixed points and their stability.
    Semiclassical(Common),
    /// Escape rate out of the blockade, fitted or golden-rule.
    Escape(Common),
    /// Three-step Fock-state protocol with displacement noise.
    Protocol(Common),
    /// Steady-state photon number around integer r.
    Antiresonance(Common),
    /// Sampled displacement noise against the analytic channel.
    Channel(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Tune(c) => ("tune", c),
            Command::Evolve(c) => ("evolve", c),
            Command::Steady(c) => ("steady", c),
            Command::Spectrum(c) => ("spectrum", c),
            Command::Semiclassical(c) => ("semiclassical", c),
            Command::Escape(c) => ("escape", c),
            Command::Protocol(c) => ("protocol", c),
            Command::Antiresonance(c) => ("antiresonance", c),
            Command::Channel(c) => ("channel", c),
        }
    }
}

/// Outcome of a completed run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub csv: PathBuf,
    pub summary: PathBuf,
    pub checks: Checks,
    pub passed: bool,
}

fn load_config(name: &str, common: &Common) -> Result<String> {
    match (&common.config, &common.preset) {
        (Some(path), None) => Ok(std::fs::read_to_string(path)?),
        (None, Some(p)) => {
            let preset = presets::find(p).ok_or_else(|| Error::Config {
                line: None,
                message: format!(
                    "unknown preset `{p}`; available: {}",
                    presets::PRESETS.iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
                ),
            })?;
            if preset.command != name {
                return Err(Error::Config {
                    line: None,
                    message: format!("preset `{p}` belongs to `{}`, not `{name}`", preset.command),
                });
            }
            Ok(preset.config.to_string())
        }
        (None, None) => Err(Error::Config { line: None, message: "pass --config PATH or --preset NAME".into() }),
        (Some(_), Some(_)) => Err(Error::Config { line: None, message: "--config and --preset are exclusive".into() }),
    }
}

fn run_point(name: &str, cfg: &RunConfig, seed: u64) -> Result<PointOutput> {
    match name {
        "tune" => Ok(commands::tune(cfg)),
        "evolve" => commands::evolve(cfg),
        "steady" => commands::steady(cfg),
        "spectrum" => commands::spectrum(cfg),
        "semiclassical" => commands::semiclassical(cfg),
        "escape" => commands::escape(cfg),
        "protocol" => commands::protocol(cfg),
        "antiresonance" => commands::antiresonance(cfg),
        "channel" => commands::channel(cfg, seed),
        other => Err(Error::Config { line: None, message: format!("unknown command `{other}`") }),
    }
}

fn leakage_budget(cfg: &RunConfig) -> f64 {
    cfg.time.as_ref().map_or(crate::dynamics::LEAKAGE_BUDGET, |t| t.leakage_budget)
}

/// Run one command from already-loaded config text.
pub fn run_text(name: &str, text: &str, out: &Path, workers: Option<usize>, seed: u64) -> Result<RunReport> {
    let start = Instant::now();
    let cfg = RunConfig::parse(text, name)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;

    let (table, results, checks) = match &cfg.sweep {
        None => {
            let p = pool.install(|| run_point(name, &cfg, seed))?;
            (p.table, p.results, p.checks)
        }
        Some(sweep) => {
            let points: Vec<RunConfig> = sweep.values.iter().map(|&v| commands::apply_sweep(&cfg, &sweep.param, v)).collect();
            let outs: Vec<PointOutput> = pool.install(|| {
                points
                    .par_iter()
                    .zip(sweep.values.par_iter())
                    .map(|(c, &v)| {
                        run_point(name, c, seed).map_err(|e| match e {
                            Error::Config { .. } => e,
                            other => Error::InvalidParameter(format!("{} = {v}: {other}", sweep.param)),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            let mut checks = Checks::default();
            let mut tables = Vec::new();
            let mut points = Vec::new();
            for (p, &v) in outs.into_iter().zip(&sweep.values) {
                checks = checks.merge(p.checks);
                tables.push(p.table.with_sweep(&sweep.param, v));
                points.push(json!({"sweep_value": v, "results": p.results}));
            }
            let table = if tables.is_empty() {
                Table::new(&["sweep_param", "sweep_value"])
            } else {
                Table::concat(tables)
            };
            (table, json!({"sweep_param": sweep.param, "points": points}), checks)
        }
    };

    std::fs::create_dir_all(out)?;
    let csv = out.join(format!("{name}.csv"));
    let summary_path = out.join(format!("{name}.summary.json"));
    table.write(&csv)?;
    let summary = Summary {
        command: name,
        config_hash: output::config_hash(text),
        params: &cfg,
        results,
        checks,
        runtime_s: start.elapsed().as_secs_f64(),
    };
    output::write_json(&summary_path, &summary)?;
    let passed = checks.converged
        && checks.trace_drift <= commands::TRACE_DRIFT_LIMIT
        && checks.leakage <= leakage_budget(&cfg);
    Ok(RunReport { csv, summary: summary_path, checks, passed })
}

fn error_record(e: &Error) -> String {
    let line = match e {
        Error::Config { line, .. } => *line,
        _ => None,
    };
    json!({"error": {"kind": e.kind(), "message": e.to_string(), "line": line}}).to_string()
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (name, common) = cli.command.parts();
    let result = load_config(name, common).and_then(|text| run_text(name, &text, &common.out, common.workers, common.seed));
    match result {
        Ok(report) => {
            if !report.passed {
                log::warn!("checks failed: {:?}", report.checks);
                return 2;
            }
            0
        }
        Err(e) => {
            println!("{}", error_record(&e));
            1
        }
    }
}
