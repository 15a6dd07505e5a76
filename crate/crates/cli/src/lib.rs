//! Command-line runner for lprkit experiments.

pub mod config;
pub mod error;
pub mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Config, ExperimentId};
pub use error::{CliError, CliResult};
pub use run::{replay, run_experiment, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "lprkit", version, about = "Littlewood-Paley square function experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write summary.json, cases.csv and plot.csv.
    Run {
        #[arg(long)]
        experiment: String,
        /// JSON config; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "LPRKIT_JOBS")]
        jobs: Option<usize>,
    },
    /// Re-run one recorded case of a finished run.
    Replay {
        #[arg(long)]
        case: usize,
        /// Directory of the original run.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "LPRKIT_JOBS")]
        jobs: Option<usize>,
    },
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
            jobs,
        } => {
            let manifest = RunManifest {
                experiment: experiment.parse()?,
                config,
                out,
                seed,
                jobs: jobs.unwrap_or_else(default_jobs),
            };
            run_experiment(&manifest)?;
            Ok(format!("{} written to {}", manifest.experiment, manifest.out.display()))
        }
        Command::Replay { case, out, jobs } => {
            let r = replay(&out, case, jobs.unwrap_or_else(default_jobs))?;
            Ok(format!("case {} replayed: {:?} (recorded {:?})", r.case, r.ratio, r.recorded_ratio))
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(msg) => {
            println!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("lprkit: {e}");
            e.exit_code()
        }
    }
}
