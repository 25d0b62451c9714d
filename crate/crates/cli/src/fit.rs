use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use newer_core::{
    extract_subcascades, filter_cascades, fit::assemble_training, fit_baseline, fit_newer, io, newer_objective,
    BaselineKind, FeatureMatrix, FitReport, Hyperparams, InitialState, ModelKind, NewerModel, SolverOptions,
};
use serde::Serialize;

use crate::config::{parse_choice, RunConfig};
use crate::{inputs, usage};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// newer, plain_weibull, exponential, rayleigh or cox.
    #[arg(long)]
    model: Option<String>,
    /// Training cascades (JSONL).
    #[arg(long, required_unless_present = "subcascades", conflicts_with = "subcascades")]
    cascades: Option<PathBuf>,
    /// Per-user delay samples (JSONL) instead of cascades; needs --features.
    #[arg(long, requires = "features")]
    subcascades: Option<PathBuf>,
    /// Follower network (CSV); used to compute covariates when --features is absent.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Covariate table (CSV).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Cascades for computing covariates; defaults to the training cascades.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Fit report file; defaults to `<out stem>_report.json` next to the model.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Start from a saved model.
    #[arg(long)]
    warm_start: Option<PathBuf>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    alpha_beta: Option<f64>,
    #[arg(long)]
    alpha_gamma: Option<f64>,
    /// Users with fewer delays are left to the covariate regression.
    #[arg(long)]
    min_events: Option<usize>,
    /// Cascades smaller than this are ignored.
    #[arg(long)]
    min_cascade_size: Option<usize>,
}

#[derive(Debug, Serialize)]
struct FitSummary {
    model: ModelKind,
    users: usize,
    min_events: usize,
    /// Final value of the NEWER objective under the model's hyperparameters.
    objective: f64,
    /// Outer-loop trace; absent for closed-form baselines.
    trace: Option<FitReport>,
}

fn report_path(args: &Args) -> PathBuf {
    args.report.clone().unwrap_or_else(|| {
        let stem = args.out.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned());
        args.out.with_file_name(format!("{stem}_report.json"))
    })
}

fn baseline_of(kind: ModelKind) -> Option<BaselineKind> {
    match kind {
        ModelKind::Newer => None,
        ModelKind::PlainWeibull => Some(BaselineKind::PlainWeibull),
        ModelKind::Exponential => Some(BaselineKind::Exponential),
        ModelKind::Rayleigh => Some(BaselineKind::Rayleigh),
        ModelKind::Cox => Some(BaselineKind::CoxSharedShape),
    }
}

fn load_path(p: &Path) -> Result<NewerModel> {
    NewerModel::load(p).with_context(|| format!("loading model {}", p.display()))
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let f = &cfg.fit;
    let kind: ModelKind = parse_choice("model", args.model.as_deref().or(f.model.as_deref()).unwrap_or("newer"))?;
    let defaults = Hyperparams::default();
    let hyper = Hyperparams {
        mu: args.mu.or(f.mu).unwrap_or(defaults.mu),
        eta: args.eta.or(f.eta).unwrap_or(defaults.eta),
        alpha_beta: args.alpha_beta.or(f.alpha_beta).unwrap_or(defaults.alpha_beta),
        alpha_gamma: args.alpha_gamma.or(f.alpha_gamma).unwrap_or(defaults.alpha_gamma),
    };
    hyper.validate()?;
    let min_events = args.min_events.or(f.min_events).unwrap_or(5);
    let min_size = args
        .min_cascade_size
        .or(f.min_cascade_size)
        .unwrap_or(newer_core::features::DEFAULT_MIN_CASCADE_SIZE);
    if args.warm_start.is_some() && kind != ModelKind::Newer {
        return Err(usage("--warm-start applies only to --model newer"));
    }

    let net = args.network.as_deref().map(inputs::network).transpose()?;
    let (samples, table) = match (&args.cascades, &args.subcascades) {
        (Some(path), _) => {
            let cascades = filter_cascades(&inputs::cascades(path)?, min_size);
            let history = args.history.as_deref().map(inputs::cascades).transpose()?;
            let table = inputs::features(args.features.as_deref(), net.as_ref(), history.as_deref().unwrap_or(&cascades))?
                .ok_or_else(|| usage("fit needs --features or --network"))?;
            let samples: Vec<_> = extract_subcascades(&cascades)?.into_values().collect();
            (samples, table)
        }
        (None, Some(path)) => {
            let samples = io::read_subcascades(path).with_context(|| format!("loading {}", path.display()))?;
            let table = inputs::features(args.features.as_deref(), None, &[])?.expect("clap requires --features");
            (samples, table)
        }
        (None, None) => unreachable!("clap requires an input"),
    };
    let (samples, rows) = assemble_training(&samples, |u| table.row(u).map(<[f64]>::to_vec), min_events)?;
    if samples.is_empty() {
        anyhow::bail!("no user has at least {min_events} subcascade events");
    }
    let x = FeatureMatrix::new(table.names().to_vec(), rows)?;

    let mut opts = SolverOptions::default();
    if let Some(p) = &args.warm_start {
        opts.init = Some(InitialState::from_model(&load_path(p)?, &samples, &x)?);
    }
    let (model, trace) = match baseline_of(kind) {
        None => {
            let (m, r) = fit_newer(&samples, &x, hyper, &opts)?;
            (m, Some(r))
        }
        Some(b) => (fit_baseline(b, &samples, &x, hyper, &opts)?, None),
    };
    let summary = FitSummary {
        model: kind,
        users: model.users().len(),
        min_events,
        objective: newer_objective(&model, &samples, &x)?,
        trace,
    };
    model.save(&args.out).with_context(|| format!("writing model {}", args.out.display()))?;
    io::write_json(report_path(&args), &summary)?;
    Ok(())
}
