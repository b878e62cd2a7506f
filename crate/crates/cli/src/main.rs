use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ege_cli::check::CheckOptions;
use ege_cli::config::{JobConfig, RawConfig, SweepConfig};
use ege_cli::{cmd_check, cmd_run, cmd_sweep, load_raw, CliError, EXIT_CONFIG};

#[derive(Parser)]
#[command(name = "egesim", version, about = "Transport through embedded Gaussian ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble and write summary.json and the CSV files
    Run {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run every (n, k) cell of a grid
    Sweep {
        file: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Verify the exact invariants
    Check {
        file: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 100)]
        samples: u64,
        #[arg(long, default_value_t = 50)]
        oracle_draws: u64,
        #[arg(long, hide = true)]
        inject_sign_fault: bool,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    l: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    ensemble_size: Option<String>,
    #[arg(long)]
    master_seed: Option<String>,
    #[arg(long)]
    centro_sampling: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        [
            ("l", &self.l),
            ("n", &self.n),
            ("k", &self.k),
            ("eta", &self.eta),
            ("ensemble_size", &self.ensemble_size),
            ("master_seed", &self.master_seed),
            ("centro_sampling", &self.centro_sampling),
            ("workers", &self.workers),
            ("output_dir", &self.output_dir),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.clone().map(|v| (k, v)))
        .collect()
    }
}

fn check_defaults() -> RawConfig {
    let mut raw = RawConfig::default();
    for (k, v) in [("l", "6"), ("n", "5"), ("k", "3")] {
        raw.set(k, v).expect("known key");
    }
    raw
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { file, overrides } => {
            let job = JobConfig::from_raw(&load_raw(Some(&file), &overrides.pairs())?)?;
            let out = cmd_run(&job)?;
            println!(
                "wrote {} ({} realizations): <I> ege {:.6} csege {:.6}",
                job.output_dir.display(),
                out.ege.count,
                out.ege.mean_current,
                out.csege.mean_current
            );
        }
        Command::Sweep { file, overrides } => {
            let sweep = SweepConfig::from_raw(&load_raw(Some(&file), &overrides.pairs())?)?;
            let outs = cmd_sweep(&sweep)?;
            println!("wrote {} cells under {}", outs.len(), sweep.output_dir.display());
        }
        Command::Check {
            file,
            overrides,
            samples,
            oracle_draws,
            inject_sign_fault,
        } => {
            let mut raw = match &file {
                Some(p) => RawConfig::load(p)?,
                None => check_defaults(),
            };
            for (k, v) in overrides.pairs() {
                raw.set(k, &v)?;
            }
            let job = JobConfig::from_raw(&raw)?;
            let opts = CheckOptions {
                samples,
                oracle_draws,
                inject_sign_fault,
            };
            let report = match cmd_check(&job, &opts) {
                Ok(r) => r,
                Err(CliError::Check(r)) => {
                    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
                    return Err(CliError::Check(r));
                }
                Err(e) => return Err(e),
            };
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("egesim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
