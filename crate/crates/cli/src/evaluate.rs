use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use newer_core::eval::{process_precision, rmsle, sigma_precision, PredictionRecord, Task as Metric, DEFAULT_SIGMA};
use newer_core::io;
use newer_core::predict::{ProcessCurve, DEFAULT_OUTBREAK_HORIZON, DEFAULT_OUTBREAK_THRESHOLD};
use serde::Serialize;

use crate::config::RunConfig;
use crate::predict::Task;
use crate::{inputs, usage};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Prediction file (JSONL) from `newer predict`.
    #[arg(long)]
    predictions: PathBuf,
    /// Complete cascades holding the ground truth (JSONL).
    #[arg(long)]
    cascades: PathBuf,
    #[arg(long, value_enum, default_value = "size")]
    task: Task,
    /// Output directory for report.csv and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Half-width of the relative precision band.
    #[arg(long)]
    sigma: Option<f64>,
    /// Outbreak size threshold used for the predictions.
    #[arg(long, default_value_t = DEFAULT_OUTBREAK_THRESHOLD as f64)]
    threshold: f64,
    /// Stand-in horizon for predictions that never reach the threshold.
    #[arg(long, default_value_t = DEFAULT_OUTBREAK_HORIZON)]
    outbreak_horizon: f64,
    /// Model name written in the report.
    #[arg(long, default_value = "model")]
    label: String,
}

#[derive(Debug, Serialize)]
struct Report {
    model: String,
    task: &'static str,
    sigma: f64,
    n: usize,
    /// Predictions without a usable ground truth.
    skipped: usize,
    rmsle: f64,
    precision: f64,
}

fn task_name(t: Task) -> &'static str {
    match t {
        Task::Size => "size",
        Task::Outbreak => "outbreak",
        Task::Process => "process",
    }
}

pub fn run(args: Args, cfg: &RunConfig) -> Result<()> {
    let sigma = args.sigma.or(cfg.evaluate.sigma).unwrap_or(DEFAULT_SIGMA);
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(usage(format!("--sigma must lie in (0, 1), got {sigma}")));
    }
    if args.label.is_empty() || args.label.contains([',', '"', '\n']) {
        return Err(usage(format!("--label must be nonempty and free of commas, quotes and newlines, got {:?}", args.label)));
    }
    let lines = io::read_predictions(&args.predictions)
        .with_context(|| format!("loading predictions {}", args.predictions.display()))?;
    let full = inputs::cascades(&args.cascades)?;
    let by_id: HashMap<&str, _> = full.iter().map(|c| (c.id.as_str(), c)).collect();

    let mut records = Vec::new();
    let mut curves = Vec::new();
    let mut skipped = 0;
    for l in &lines {
        let c = by_id
            .get(l.cascade.as_str())
            .ok_or_else(|| anyhow::anyhow!("prediction for unknown cascade {}", l.cascade))?;
        match args.task {
            Task::Size => records.push(PredictionRecord::new(&l.cascade, c.size() as f64, l.final_size, Metric::Size)),
            Task::Outbreak => {
                let need = args.threshold.ceil() as usize;
                let Some(hit) = c.events.get(need.saturating_sub(1)) else {
                    skipped += 1;
                    continue;
                };
                // Offsets from the cascade start, plus one second to keep logs finite.
                let start = c.start_time();
                let predicted = l.outbreak_t.unwrap_or(l.t_limit + args.outbreak_horizon);
                records.push(PredictionRecord::new(
                    &l.cascade,
                    hit.t - start + 1.0,
                    predicted - start + 1.0,
                    Metric::Outbreak,
                ));
            }
            Task::Process => {
                if l.curve.is_empty() {
                    skipped += 1;
                    continue;
                }
                let predicted = ProcessCurve {
                    points: l.curve.iter().map(|p| (p[0], p[1])).collect(),
                };
                let truth = ProcessCurve {
                    points: l.curve.iter().map(|p| (p[0], c.size_at(p[0]) as f64)).collect(),
                };
                curves.push(process_precision(&predicted, &truth, sigma)?);
                for (p, t) in predicted.points.iter().zip(&truth.points) {
                    records.push(PredictionRecord::new(&l.cascade, t.1, p.1, Metric::ProcessPoint));
                }
            }
        }
    }
    if records.is_empty() {
        anyhow::bail!("no prediction could be scored");
    }
    let precision = if args.task == Task::Process {
        curves.iter().sum::<f64>() / curves.len() as f64
    } else {
        sigma_precision(&records, sigma)?
    };
    let n = if args.task == Task::Process { curves.len() } else { records.len() };
    let report = Report {
        model: args.label.clone(),
        task: task_name(args.task),
        sigma,
        n,
        skipped,
        rmsle: rmsle(&records)?,
        precision,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let csv = format!(
        "model,task,sigma,n,skipped,rmsle,precision\n{},{},{},{},{},{},{}\n",
        report.model, report.task, report.sigma, report.n, report.skipped, report.rmsle, report.precision
    );
    let path = args.out.join("report.csv");
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    io::write_json(args.out.join("report.json"), &report)?;
    Ok(())
}
