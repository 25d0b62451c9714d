//! Run configuration files. Every field is optional; command-line flags
//! take precedence over file values, which take precedence over defaults.

use std::path::Path;

use anyhow::{Context, Result};
use newer_core::SimConfig;
use serde::Deserialize;

use crate::usage;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub simulate: Option<SimConfig>,
    pub fit: FitSection,
    pub predict: PredictSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub model: Option<String>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub alpha_beta: Option<f64>,
    pub alpha_gamma: Option<f64>,
    pub min_events: Option<usize>,
    pub min_cascade_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub mode: Option<String>,
    pub epsilon: Option<f64>,
    pub task: Option<String>,
    pub threshold: Option<f64>,
    pub time_offset: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub sigma: Option<f64>,
    pub min_cascade_size: Option<usize>,
    pub folds: Option<usize>,
}

impl RunConfig {
    /// Parses `.json` files as JSON and everything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| usage(format!("config {}: {e}", path.display())))
    }
}

/// Parses a keyword flag value.
pub fn parse_choice<T: std::str::FromStr>(what: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| usage(format!("unknown {what} {value:?}")))
}
