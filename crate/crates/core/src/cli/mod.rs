//! `mhla-lab` command-line harness.

mod commands;
mod options;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

pub use options::{
    CertifyOptions, DfaParam, EvalOptions, FormulationArg, GenOptions, LearnOptions, Method, RolloutOptions, SweepKind,
    SweepOptions, TaskKind,
};

use crate::error::Error;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const SEED_ENV: &str = "MHLA_LAB_SEED";

#[derive(Debug, Parser)]
#[command(name = "mhla-lab", version, about = "Learn and certify multi-head linear attention")]
pub struct Cli {
    /// TOML file with options for the subcommand; flags win over the file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also print the primary result to standard output.
    #[arg(long, global = true)]
    pub stdout: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset.
    Gen(GenOptions),
    /// Fit MHLA parameters to a dataset.
    Learn(LearnOptions),
    /// Identifiability certificate of a dataset.
    Certify(CertifyOptions),
    /// Mixture or DFA budget sweeps.
    Sweep(SweepOptions),
    /// Autoregressive rollout of params, a program or an automaton.
    Rollout(RolloutOptions),
    /// Score params on a dataset.
    Eval(EvalOptions),
}

/// Failure with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lib(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(Error::Numeric(_)) => EXIT_NUMERIC,
            _ => EXIT_USAGE,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

/// Seed from flag or file, else `MHLA_LAB_SEED`, else 0.
pub(crate) fn resolve_seed(seed: Option<u64>) -> CliResult<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Runs a parsed command line, returning the text destined for standard output.
pub fn execute(cli: Cli) -> CliResult<String> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        crate::numerics::parallel::set_max_threads(t);
    }
    let config = cli.config.as_deref();
    match cli.command {
        Command::Gen(flags) => commands::gen(&flags.overlay(load_config(config)?)),
        Command::Learn(flags) => commands::learn(&flags.overlay(load_config(config)?)),
        Command::Certify(flags) => commands::certify(&flags.overlay(load_config(config)?)),
        Command::Sweep(flags) => commands::sweep(&flags.overlay(load_config(config)?)),
        Command::Rollout(flags) => commands::rollout(&flags.overlay(load_config(config)?)),
        Command::Eval(flags) => commands::eval(&flags.overlay(load_config(config)?)),
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let print = cli.stdout;
    match execute(cli) {
        Ok(out) => {
            if print {
                print!("{out}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
