//! Driver for `egesim`: configuration, orchestration and result files.

pub mod check;
pub mod config;
pub mod output;

use std::fmt;
use std::path::Path;

use ege_transport::stats::{run_ensemble, EnsembleOutcome};

use crate::check::{run_check, CheckOptions, CheckReport};
use crate::config::{ConfigError, JobConfig, RawConfig, SweepConfig, Workers};

pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_CHECK: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Numerical(ege_transport::Error),
    Io(std::io::Error),
    Check(Box<CheckReport>),
    /// A sweep cell failed; the inner error decides the exit code.
    Cell { n: usize, k: usize, source: Box<CliError> },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
            CliError::Check(_) => EXIT_CHECK,
            CliError::Cell { source, .. } => source.exit_code(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
            CliError::Check(r) => {
                let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
                write!(f, "invariant check failed: {}", failed.join(", "))
            }
            CliError::Cell { n, k, source } => write!(f, "cell n={n} k={k}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<ege_transport::Error> for CliError {
    fn from(e: ege_transport::Error) -> Self {
        match e {
            ege_transport::Error::InvalidParameter { .. } | ege_transport::Error::DimensionOverflow { .. } => {
                CliError::Config(e.into())
            }
            other => CliError::Numerical(other),
        }
    }
}

fn with_workers<T: Send>(workers: Workers, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.threads())
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(pool.install(f))
}

/// Loads `path` (if any) and applies `overrides` in order.
pub fn load_raw(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<RawConfig, ConfigError> {
    let mut raw = match path {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v)?;
    }
    Ok(raw)
}

/// Runs one job and writes its four result files.
pub fn cmd_run(job: &JobConfig) -> Result<EnsembleOutcome, CliError> {
    let outcome = with_workers(job.workers, || run_ensemble(&job.run))??;
    output::write_run(job, &outcome)?;
    Ok(outcome)
}

/// Runs every cell in order, then writes `grid_summary.json`.
pub fn cmd_sweep(sweep: &SweepConfig) -> Result<Vec<EnsembleOutcome>, CliError> {
    let mut outcomes = Vec::with_capacity(sweep.cells.len());
    for job in &sweep.cells {
        let outcome = cmd_run(job).map_err(|e| CliError::Cell {
            n: job.run.n,
            k: job.run.k,
            source: Box::new(e),
        })?;
        outcomes.push(outcome);
    }
    output::write_grid_summary(sweep, &outcomes)?;
    Ok(outcomes)
}

/// Runs the invariant suite; a failing check is an error carrying the report.
pub fn cmd_check(job: &JobConfig, opts: &CheckOptions) -> Result<CheckReport, CliError> {
    let report = with_workers(job.workers, || run_check(&job.run, opts))??;
    if report.pass {
        Ok(report)
    } else {
        Err(CliError::Check(Box::new(report)))
    }
}
