//! Command line runner: scenario configs, the experiment analyses and their
//! reports.
//!
//! Exit codes: 0 when every metric passes, 2 when some metric fails, 1 on
//! any execution error (bad config, budget, solver failure, I/O).

pub mod analysis;
pub mod config;
pub mod error;
pub mod report;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::analysis::{Analysis, Ctx};
use crate::config::{parse_config, Config};
use crate::error::{CliError, CliResult};
use crate::report::{Provenance, RunReport};
use crate::scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "scatlab", version, about = "Plane-wave scattering experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in scenario to run when no config file is given.
    #[arg(long, global = true, value_name = "NAME")]
    pub scenario: Option<String>,
    /// Output root; artifacts go to `<DIR>/<scenario>/<analysis>/`.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Worker threads; the outputs do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    pub threads: Option<usize>,
    /// Grid level `L`, overriding the configured spacing with `h = 2^-L`.
    #[arg(long, global = true, value_name = "L")]
    pub level: Option<u32>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Boundary traces for every potential, direction and wave kind.
    Simulate,
    /// Expansion tables and the Γ-limit, derivative and identity checks.
    Pwe,
    /// H- and δ-trace discrepancies of a potential pair.
    TraceCompare,
    /// Far-field amplitudes at several radii.
    Amplitude,
    /// Carleman weight properties, κ, boundary forms and the ratio sweep.
    Carleman,
    /// Traces for all 2n signed coordinate directions of a pair.
    #[command(name = "dataset-2n")]
    Dataset2n,
    /// Refinement study with per-metric log-log slopes.
    Convergence,
}

impl From<Command> for Analysis {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Analysis::Simulate,
            Command::Pwe => Analysis::Pwe,
            Command::TraceCompare => Analysis::TraceCompare,
            Command::Amplitude => Analysis::Amplitude,
            Command::Carleman => Analysis::Carleman,
            Command::Dataset2n => Analysis::Dataset2n,
            Command::Convergence => Analysis::Convergence,
        }
    }
}

/// A fully resolved run request.
#[derive(Debug, Clone)]
pub struct Options {
    pub config: Config,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub level: Option<u32>,
}

impl Options {
    /// Defaults for a built-in scenario.
    pub fn builtin(name: &str, out: impl Into<PathBuf>) -> Self {
        Self {
            config: Config::builtin(name),
            out: out.into(),
            threads: None,
            level: None,
        }
    }

    fn from_cli(cli: &Cli) -> CliResult<Self> {
        let config = match (&cli.config, &cli.scenario) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config {
                    line: None,
                    message: "give either --config or --scenario, not both".into(),
                })
            }
            (Some(path), None) => parse_config(&std::fs::read_to_string(path)?)?,
            (None, Some(name)) => Config::builtin(name),
            (None, None) => {
                return Err(CliError::Config {
                    line: None,
                    message: "no scenario: pass --config PATH or --scenario NAME".into(),
                })
            }
        };
        Ok(Self {
            config,
            out: cli.out.clone(),
            threads: cli.threads,
            level: cli.level,
        })
    }
}

/// Output directory of one analysis.
pub fn analysis_dir(out: &Path, scenario: &str, analysis: Analysis) -> PathBuf {
    out.join(scenario).join(analysis.name())
}

/// Runs one analysis and writes its artifacts and report.
pub fn execute(analysis: Analysis, opts: &Options) -> CliResult<RunReport> {
    let mut cfg = opts.config.clone();
    if let Some(level) = opts.level {
        if level > 30 {
            return Err(CliError::Config {
                line: None,
                message: format!("level {level} is out of range"),
            });
        }
        cfg.grid.h = 0.5f64.powi(level as i32);
    }
    if !(cfg.grid.h > 0.0) || !(cfg.grid.t_sim > 0.0) || !(cfg.grid.epsilon_cells > 0.0) {
        return Err(CliError::Config {
            line: None,
            message: "grid h, t_sim and epsilon_cells must be positive".into(),
        });
    }
    let scenario = Scenario::from_config(&cfg)?;
    let dir = analysis_dir(&opts.out, &scenario.name, analysis);
    std::fs::create_dir_all(&dir)?;
    let ctx = Ctx {
        cfg: &cfg,
        scenario: &scenario,
        dir: &dir,
    };
    let start = Instant::now();
    let body = || match analysis {
        Analysis::Simulate => analysis::simulate(&ctx),
        Analysis::Pwe => analysis::pwe(&ctx),
        Analysis::TraceCompare => analysis::trace_compare(&ctx),
        Analysis::Amplitude => analysis::amplitude(&ctx),
        Analysis::Carleman => analysis::carleman(&ctx),
        Analysis::Dataset2n => analysis::dataset_2n(&ctx),
        Analysis::Convergence => analysis::convergence(&ctx),
    };
    let metrics = match opts.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| CliError::Config {
                line: None,
                message: format!("cannot build a pool of {k} threads: {e}"),
            })?
            .install(body)?,
        None => body()?,
    };
    let mut provenance = Provenance::new(&cfg.grid, opts.level, opts.threads);
    if analysis == Analysis::Carleman {
        provenance.seed = Some(cfg.carleman.seed);
    }
    let report = RunReport {
        scenario: scenario.name.clone(),
        scenario_hash: scenario.hash(),
        analysis: analysis.name().to_string(),
        metrics,
        provenance,
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    report.write(&dir)?;
    Ok(report)
}

/// Parses `args` (program name first), runs, prints one line per metric and
/// returns the process exit code.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = Options::from_cli(&cli).and_then(|opts| execute(cli.command.into(), &opts));
    match result {
        Ok(report) => {
            for m in &report.metrics {
                println!("{}", m.line());
            }
            println!(
                "{} {}/{}: {} metrics, {:.1} s",
                if report.passed() { "PASS" } else { "FAIL" },
                report.scenario,
                report.analysis,
                report.metrics.len(),
                report.runtime_seconds
            );
            if report.passed() {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
