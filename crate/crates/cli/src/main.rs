//! `newer`: simulate cascades, fit per-user dynamics, predict and evaluate.

mod config;
mod evaluate;
mod experiment;
mod fit;
mod inputs;
mod predict;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "newer", version, about = "Networked Weibull regression for cascade prediction")]
struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "NEWER_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic network, cascades and ground-truth dynamics.
    Simulate(simulate::Args),
    /// Fit NEWER or a baseline to observed cascades.
    Fit(fit::Args),
    /// Predict sizes, outbreak times or cascading processes.
    Predict(predict::Args),
    /// Score a prediction file against full cascades.
    Evaluate(evaluate::Args),
    /// Cross-validated comparison of every model under one protocol.
    Experiment(experiment::Args),
}

/// An invalid flag or configuration value, reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(cfg.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate(a) => simulate::run(a, &cfg),
        Command::Fit(a) => fit::run(a, &cfg),
        Command::Predict(a) => predict::run(a, &cfg),
        Command::Evaluate(a) => evaluate::run(a, &cfg),
        Command::Experiment(a) => experiment::run(a, &cfg),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let usage_like = err.chain().any(|e| {
        e.is::<UsageError>() || matches!(e.downcast_ref::<newer_core::Error>(), Some(newer_core::Error::Config(_)))
    });
    if usage_like {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
