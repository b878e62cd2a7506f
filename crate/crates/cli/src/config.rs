//! Flat `key = value` job files.
//!
//! Blank lines and `#` comments are ignored. A file whose first non-blank
//! character is `{` is read as JSON instead: either a `summary.json` written
//! by `run` (its `config` object is used) or a plain object of the same keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ege_transport::ensemble::CentroSampling;
use ege_transport::stats::RunConfig;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config field `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

impl From<ege_transport::Error> for ConfigError {
    fn from(e: ege_transport::Error) -> Self {
        use ege_transport::Error::*;
        match e {
            InvalidParameter { name, reason } => ConfigError::new(name, reason),
            DimensionOverflow { dimension, cap } => ConfigError::new(
                "dimension_cap",
                format!("binomial(l, n) = {dimension} exceeds cap {cap}"),
            ),
            other => ConfigError::new("config", other.to_string()),
        }
    }
}

/// Worker-pool size; `Auto` leaves the choice to rayon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Fixed(usize),
}

impl FromStr for Workers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Workers::Auto),
            _ => match s.parse::<usize>() {
                Ok(0) => Err("must be at least 1 or `auto`".into()),
                Ok(n) => Ok(Workers::Fixed(n)),
                Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
            },
        }
    }
}

impl fmt::Display for Workers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Workers::Auto => f.write_str("auto"),
            Workers::Fixed(n) => write!(f, "{n}"),
        }
    }
}

impl Workers {
    pub fn threads(self) -> usize {
        match self {
            Workers::Auto => 0,
            Workers::Fixed(n) => n,
        }
    }
}

/// Raw key/value pairs, later keys overriding earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "l",
    "n",
    "k",
    "eta",
    "ensemble_size",
    "master_seed",
    "centro_sampling",
    "random_energies_per_sample",
    "energy_grid_points",
    "rel_tol_current",
    "pilot_size",
    "histogram_bins",
    "mode_bins",
    "dimension_cap",
    "workers",
    "output_dir",
    "cells",
    "check_samples",
    "oracle_draws",
];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            return Self::parse_json(text);
        }
        let mut raw = RawConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            raw.set(key.trim(), value.trim())?;
        }
        Ok(raw)
    }

    fn parse_json(text: &str) -> Result<Self, ConfigError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::new("config", e.to_string()))?;
        let obj = v.get("config").unwrap_or(&v);
        let obj = obj
            .as_object()
            .ok_or_else(|| ConfigError::new("config", "expected a JSON object"))?;
        let mut raw = RawConfig::default();
        for (key, value) in obj {
            let text = match value {
                Value::String(s) => s.clone(),
                Value::Null => continue,
                other => other.to_string(),
            };
            raw.set(key, &text)?;
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::new(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| ConfigError::new(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let v = self.get(key).ok_or_else(|| ConfigError::new(key, "missing"))?;
        v.parse()
            .map_err(|e| ConfigError::new(key, format!("cannot parse `{v}`: {e}")))
    }

    /// Every ensemble setting except `n` and `k`.
    fn shared(&self, n: usize, k: usize) -> Result<RunConfig, ConfigError> {
        let d = RunConfig::default();
        Ok(RunConfig {
            l: self.required("l")?,
            n,
            k,
            eta: self.parsed("eta", d.eta)?,
            ensemble_size: self.parsed("ensemble_size", d.ensemble_size)?,
            master_seed: self.parsed("master_seed", d.master_seed)?,
            centro_sampling: self.parsed::<CentroSampling>("centro_sampling", d.centro_sampling)?,
            random_energies_per_sample: self.parsed("random_energies_per_sample", d.random_energies_per_sample)?,
            energy_grid_points: self.parsed("energy_grid_points", d.energy_grid_points)?,
            rel_tol_current: self.parsed("rel_tol_current", d.rel_tol_current)?,
            pilot_size: self.parsed("pilot_size", d.pilot_size)?,
            histogram_bins: self.parsed("histogram_bins", d.histogram_bins)?,
            mode_bins: self.parsed("mode_bins", d.mode_bins)?,
            dimension_cap: self.parsed("dimension_cap", d.dimension_cap)?,
        })
    }

    fn workers(&self) -> Result<Workers, ConfigError> {
        self.parsed("workers", Workers::Auto)
    }

    fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir").unwrap_or("out"))
    }
}

/// A single ensemble job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub run: RunConfig,
    pub workers: Workers,
    pub output_dir: PathBuf,
}

impl JobConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let run = raw.shared(raw.required("n")?, raw.required("k")?)?;
        run.validate()?;
        Ok(JobConfig {
            run,
            workers: raw.workers()?,
            output_dir: raw.output_dir(),
        })
    }

    /// Every effective setting, in the form `run` accepts back.
    pub fn to_json(&self) -> Value {
        let r = &self.run;
        json!({
            "l": r.l,
            "n": r.n,
            "k": r.k,
            "eta": r.eta,
            "ensemble_size": r.ensemble_size,
            "master_seed": r.master_seed,
            "centro_sampling": r.centro_sampling.to_string(),
            "random_energies_per_sample": r.random_energies_per_sample,
            "energy_grid_points": r.energy_grid_points,
            "rel_tol_current": r.rel_tol_current,
            "pilot_size": r.pilot_size,
            "histogram_bins": r.histogram_bins,
            "mode_bins": r.mode_bins,
            "dimension_cap": r.dimension_cap,
            "workers": self.workers.to_string(),
            "output_dir": self.output_dir.display().to_string(),
        })
    }
}

/// An `(n, k)` grid sharing every other setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cells: Vec<JobConfig>,
    pub l: usize,
    pub workers: Workers,
    pub output_dir: PathBuf,
}

impl SweepConfig {
    /// `cells` is `all` (default) or a comma list of `n:k` pairs.
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let l: usize = raw.required("l")?;
        let pairs: Vec<(usize, usize)> = match raw.get("cells").unwrap_or("all").trim() {
            "all" => (1..l).flat_map(|n| (1..=n).map(move |k| (n, k))).collect(),
            list => list
                .split(',')
                .map(|p| {
                    let (n, k) = p
                        .trim()
                        .split_once(':')
                        .ok_or_else(|| ConfigError::new("cells", format!("expected `n:k`, got `{}`", p.trim())))?;
                    let parse = |s: &str| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|e| ConfigError::new("cells", format!("`{}`: {e}", p.trim())))
                    };
                    Ok((parse(n)?, parse(k)?))
                })
                .collect::<Result<_, ConfigError>>()?,
        };
        if pairs.is_empty() {
            return Err(ConfigError::new("cells", "no cells"));
        }
        let workers = raw.workers()?;
        let output_dir = raw.output_dir();
        let cells = pairs
            .into_iter()
            .map(|(n, k)| {
                let run = raw.shared(n, k)?;
                run.validate().map_err(|e| {
                    let e = ConfigError::from(e);
                    ConfigError::new(e.field, format!("cell n={n} k={k}: {}", e.reason))
                })?;
                Ok(JobConfig {
                    run,
                    workers,
                    output_dir: output_dir.join(cell_dir(n, k)),
                })
            })
            .collect::<Result<_, ConfigError>>()?;
        Ok(SweepConfig {
            cells,
            l,
            workers,
            output_dir,
        })
    }
}

pub fn cell_dir(n: usize, k: usize) -> String {
    format!("n{n}_k{k}")
}
