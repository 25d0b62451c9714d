use std::path::PathBuf;

use anyhow::{Context, Result};
use newer_core::eval::{run_experiment, ExperimentConfig, ExperimentData, ModelChoice, Protocol};
use newer_core::io;
use newer_core::predict::DEFAULT_OUTBREAK_THRESHOLD;

use crate::config::{parse_choice, RunConfig};
use crate::{inputs, usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProtocolName {
    Size,
    Outbreak,
    Process,
    OutOfSample,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    network: PathBuf,
    /// Cascades to split into folds (JSONL).
    #[arg(long)]
    cascades: PathBuf,
    /// Covariates for every node; computed from --history (or the cascades) when absent.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "size")]
    protocol: ProtocolName,
    /// Observation prefixes (events) for the size protocol.
    #[arg(long, value_delimiter = ',', default_values_t = [5usize, 10, 25])]
    prefixes: Vec<usize>,
    /// Observed prefix for the outbreak and out-of-sample protocols.
    #[arg(long, default_value_t = 10)]
    prefix: usize,
    #[arg(long, default_value_t = DEFAULT_OUTBREAK_THRESHOLD as f64)]
    threshold: f64,
    /// Observed duration fractions for the process protocol.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.15, 0.3])]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    grid_points: usize,
    /// Share of users hidden from training in the out-of-sample protocol.
    #[arg(long, default_value_t = 0.1)]
    hidden_fraction: f64,
    /// Comma-separated subset of newer, plain_weibull, exponential, rayleigh, cox, log_linear.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    min_events: Option<usize>,
    #[arg(long)]
    min_cascade_size: Option<usize>,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let mut ec = ExperimentConfig::default();
    if let Some(f) = args.folds.or(cfg.evaluate.folds) {
        ec.folds = f;
    }
    if let Some(s) = args.sigma.or(cfg.evaluate.sigma) {
        ec.sigma = s;
    }
    if let Some(s) = args.seed.or(cfg.seed) {
        ec.seed = s;
    }
    if let Some(m) = args.min_events.or(cfg.fit.min_events) {
        ec.min_events = m;
    }
    if let Some(m) = args.min_cascade_size.or(cfg.evaluate.min_cascade_size) {
        ec.min_cascade_size = m;
    }
    let h = &cfg.fit;
    ec.hyper.mu = h.mu.unwrap_or(ec.hyper.mu);
    ec.hyper.eta = h.eta.unwrap_or(ec.hyper.eta);
    ec.hyper.alpha_beta = h.alpha_beta.unwrap_or(ec.hyper.alpha_beta);
    ec.hyper.alpha_gamma = h.alpha_gamma.unwrap_or(ec.hyper.alpha_gamma);
    ec.hyper.validate()?;
    if let Some(models) = &args.models {
        ec.models = models
            .iter()
            .map(|m| parse_choice::<ModelChoice>("model", m))
            .collect::<Result<_>>()?;
    }
    if ec.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let protocol = match args.protocol {
        ProtocolName::Size => Protocol::Size { prefixes: args.prefixes.clone() },
        ProtocolName::Outbreak => Protocol::Outbreak {
            threshold: args.threshold,
            prefix: args.prefix,
        },
        ProtocolName::Process => Protocol::Process {
            fractions: args.fractions.clone(),
            grid_points: args.grid_points,
        },
        ProtocolName::OutOfSample => Protocol::OutOfSample {
            hidden_fraction: args.hidden_fraction,
            prefix: args.prefix,
        },
    };

    let net = inputs::network(&args.network)?;
    let cascades = inputs::cascades(&args.cascades)?;
    let history = args.history.as_deref().map(inputs::cascades).transpose()?;
    let table = inputs::features(args.features.as_deref(), Some(&net), history.as_deref().unwrap_or(&cascades))?
        .expect("network is present");
    let data = ExperimentData {
        network: &net,
        cascades: &cascades,
        features: &table,
    };
    let report = run_experiment(&protocol, &data, &ec)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = args.out.join("report.csv");
    std::fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    io::write_json(args.out.join("report.json"), &report)?;
    Ok(())
}
