//! Metrics, experiment protocols and dominance diagnostics.

mod dominance;
mod experiment;
mod loglinear;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::ProcessCurve;

pub use dominance::{dominance_report, pooled_child_counts, top_fraction_share, CascadeDominance, DominanceReport};
pub use experiment::{
    run_experiment, stratified_folds, ExperimentConfig, ExperimentData, ExperimentReport, ModelChoice, Protocol,
    ReportRow,
};
pub use loglinear::{cascade_features, LogLinearModel, LOG_LINEAR_FEATURES};

/// Reporting default for the precision band.
pub const DEFAULT_SIGMA: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Size,
    Outbreak,
    ProcessPoint,
}

/// One prediction paired with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub cascade: String,
    pub truth: f64,
    pub predicted: f64,
    pub task: Task,
}

impl PredictionRecord {
    pub fn new(cascade: impl Into<String>, truth: f64, predicted: f64, task: Task) -> Self {
        Self {
            cascade: cascade.into(),
            truth,
            predicted,
            task,
        }
    }
}

fn check_positive(r: &PredictionRecord) -> Result<()> {
    if r.truth > 0.0 && r.predicted > 0.0 && r.truth.is_finite() && r.predicted.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "cascade {}: log metrics need positive values, got truth {} and prediction {}",
            r.cascade, r.truth, r.predicted
        )))
    }
}

/// Root mean squared difference of natural logs.
pub fn rmsle(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    let mut total = 0.0;
    for r in records {
        check_positive(r)?;
        total += (r.predicted.ln() - r.truth.ln()).powi(2);
    }
    Ok((total / records.len() as f64).sqrt())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(Error::Input(format!("sigma must lie in (0, 1), got {sigma}")))
    }
}

#[inline]
fn within(truth: f64, predicted: f64, sigma: f64) -> bool {
    truth * (1.0 - sigma) <= predicted && predicted <= truth * (1.0 + sigma)
}

/// Fraction of records with `truth·(1−σ) ≤ pred ≤ truth·(1+σ)`.
pub fn sigma_precision(records: &[PredictionRecord], sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if records.is_empty() {
        return Err(Error::Input("no records".into()));
    }
    let hits = records.iter().filter(|r| within(r.truth, r.predicted, sigma)).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Fraction of grid points where the predicted size is within `(1 ± σ)` of the truth.
pub fn process_precision(predicted: &ProcessCurve, truth: &ProcessCurve, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if predicted.points.len() != truth.points.len()
        || predicted.points.iter().zip(&truth.points).any(|(p, t)| p.0 != t.0)
    {
        return Err(Error::Input("process curves are on different grids".into()));
    }
    if truth.points.is_empty() {
        return Err(Error::Input("empty process curves".into()));
    }
    let hits = predicted
        .points
        .iter()
        .zip(&truth.points)
        .filter(|(p, t)| within(t.1, p.1, sigma))
        .count();
    Ok(hits as f64 / truth.points.len() as f64)
}
