use std::path::PathBuf;

use anyhow::{Context, Result};
use newer_core::io::{self, PredictionLine};
use newer_core::predict::{DynamicsSource, ModelDynamics, DEFAULT_OUTBREAK_HORIZON, DEFAULT_OUTBREAK_THRESHOLD};
use newer_core::{BasicPredictor, Cascade, NewerModel, Outbreak, PartialCascade, PredictOptions, SamplingPredictor};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::{inputs, usage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Basic,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Task {
    Size,
    Outbreak,
    Process,
}

/// Prediction horizon for the size task, relative to the end of observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Now,
    Inf,
    After(f64),
}

impl std::str::FromStr for Horizon {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "now" => Ok(Horizon::Now),
            "inf" => Ok(Horizon::Inf),
            _ => match s.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(Horizon::After(v)),
                _ => Err(format!("expected now, inf or nonnegative seconds, got {s:?}")),
            },
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    model: PathBuf,
    /// Follower network (CSV); its size sets the death-rate floor.
    #[arg(long)]
    network: PathBuf,
    /// Cascades to predict (JSONL).
    #[arg(long)]
    cascades: PathBuf,
    /// Covariates for users the model was not fitted on.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Approximation bound of the sampling predictor.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    task: Option<Task>,
    /// Size-task horizon: now, inf or seconds after the observation end.
    #[arg(long, default_value = "inf")]
    te: Horizon,
    /// Outbreak size threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Seconds added to elapsed times, matching the fitting delay shift.
    #[arg(long)]
    time_offset: Option<f64>,
    /// Observe only the first N events of each cascade.
    #[arg(long, conflicts_with = "observe_seconds")]
    observe_prefix: Option<usize>,
    /// Observe only events within this many seconds of each cascade's start.
    #[arg(long)]
    observe_seconds: Option<f64>,
    /// Process-task grid size.
    #[arg(long, default_value_t = 20)]
    grid_points: usize,
    /// Process-task grid span in seconds after the observation end.
    #[arg(long, default_value_t = 86_400.0)]
    process_horizon: f64,
    /// Outbreak search window in seconds.
    #[arg(long, default_value_t = DEFAULT_OUTBREAK_HORIZON)]
    outbreak_horizon: f64,
}

struct Settings {
    mode: Mode,
    epsilon: f64,
    task: Task,
    threshold: f64,
    opts: PredictOptions,
    te: Horizon,
    grid_points: usize,
    process_horizon: f64,
}

fn observe(c: &Cascade, args: &Args, v: usize) -> Result<PartialCascade> {
    let pc = match (args.observe_prefix, args.observe_seconds) {
        (Some(n), _) => PartialCascade::observe_prefix(c, n, v)?,
        (None, Some(s)) => PartialCascade::observe_until(c, c.start_time() + s, v)?,
        (None, None) => PartialCascade::new(c.clone(), c.last_time(), v)?,
    };
    Ok(pc)
}

/// Sizes from either predictor behind one interface.
enum Engine {
    Basic(BasicPredictor),
    Sampling(SamplingPredictor, f64),
}

impl Engine {
    fn size_at(&mut self, t: f64) -> Result<f64> {
        Ok(match self {
            Engine::Basic(b) => b.size_at(t)?,
            Engine::Sampling(s, now) => s.query_size(*now, t)?,
        })
    }

    fn final_size(&mut self) -> Result<f64> {
        Ok(match self {
            Engine::Basic(b) => b.final_size(),
            Engine::Sampling(s, now) => s.query_final(*now)?,
        })
    }

    fn outbreak(&mut self, threshold: f64) -> Result<Outbreak> {
        Ok(match self {
            Engine::Basic(b) => b.outbreak_time(threshold)?,
            Engine::Sampling(s, now) => s.outbreak_time(*now, threshold)?,
        })
    }
}

fn predict_one(pc: &PartialCascade, dynamics: &ModelDynamics, set: &Settings) -> Result<PredictionLine> {
    let c = pc.cascade();
    let t_limit = pc.t_limit();
    let mut engine = match set.mode {
        Mode::Basic => Engine::Basic(BasicPredictor::new(pc, dynamics, set.opts)?),
        Mode::Sampling => {
            let mut s = SamplingPredictor::new(pc.network_size(), set.epsilon, set.opts)?;
            for e in &c.events {
                s.feed_event(e, dynamics)?;
            }
            Engine::Sampling(s, t_limit)
        }
    };
    let final_size = match (set.task, set.te) {
        (Task::Size, Horizon::Now) => engine.size_at(t_limit)?,
        (Task::Size, Horizon::After(d)) => engine.size_at(t_limit + d)?,
        _ => engine.final_size()?,
    };
    let outbreak_t = match set.task {
        Task::Outbreak => engine.outbreak(set.threshold)?.time(),
        _ => None,
    };
    let curve = match set.task {
        Task::Process => {
            let g = set.grid_points.max(2);
            (0..g)
                .map(|i| {
                    let t = t_limit + set.process_horizon * i as f64 / (g - 1) as f64;
                    Ok([t, engine.size_at(t)?])
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => Vec::new(),
    };
    let fallback_users = c
        .events
        .iter()
        .filter(|e| dynamics.resolve(&e.user).1 == DynamicsSource::Fallback)
        .map(|e| e.user.clone())
        .collect();
    Ok(PredictionLine {
        cascade: c.id.clone(),
        t_limit,
        final_size,
        outbreak_t,
        curve,
        fallback_users,
    })
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let p = &cfg.predict;
    let mode = match (args.mode, p.mode.as_deref()) {
        (Some(m), _) => m,
        (None, Some(s)) => clap::ValueEnum::from_str(s, true).map_err(|_| usage(format!("unknown mode {s:?}")))?,
        (None, None) => Mode::Basic,
    };
    let task = match (args.task, p.task.as_deref()) {
        (Some(t), _) => t,
        (None, Some(s)) => clap::ValueEnum::from_str(s, true).map_err(|_| usage(format!("unknown task {s:?}")))?,
        (None, None) => Task::Size,
    };
    let epsilon = args.epsilon.or(p.epsilon).unwrap_or(0.1);
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(usage(format!("--epsilon must be positive, got {epsilon}")));
    }
    let threshold = args.threshold.or(p.threshold).unwrap_or(DEFAULT_OUTBREAK_THRESHOLD as f64);
    if !(threshold >= 1.0 && threshold.is_finite()) {
        return Err(usage(format!("--threshold must be at least 1, got {threshold}")));
    }
    if !(args.process_horizon.is_finite() && args.process_horizon >= 0.0) {
        return Err(usage("--process-horizon must be nonnegative"));
    }
    let opts = PredictOptions {
        time_offset: args.time_offset.or(p.time_offset).unwrap_or(PredictOptions::default().time_offset),
        outbreak_horizon: args.outbreak_horizon,
    };
    let set = Settings {
        mode,
        epsilon,
        task,
        threshold,
        opts,
        te: args.te,
        grid_points: args.grid_points,
        process_horizon: args.process_horizon,
    };

    let model = NewerModel::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let net = inputs::network(&args.network)?;
    let cascades = inputs::cascades(&args.cascades)?;
    let table = inputs::features(args.features.as_deref(), None, &[])?;
    let dynamics = ModelDynamics::new(&model, table.as_ref());
    let v = net.node_count();

    let lines = cascades
        .par_iter()
        .map(|c| {
            let pc = observe(c, &args, v).with_context(|| format!("cascade {}", c.id))?;
            predict_one(&pc, &dynamics, &set).with_context(|| format!("cascade {}", c.id))
        })
        .collect::<Result<Vec<_>>>()?;
    for l in &lines {
        if !l.fallback_users.is_empty() {
            eprintln!(
                "warning: cascade {}: {} user(s) without dynamics or features use the population fallback",
                l.cascade,
                l.fallback_users.len()
            );
        }
    }
    io::write_predictions(&args.out, &lines)?;
    Ok(())
}
