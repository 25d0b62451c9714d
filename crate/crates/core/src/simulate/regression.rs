use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, sample_weibull_n};
use crate::error::{Error, Result};
use crate::fit::{FeatureMatrix, SubcascadeSample};
use crate::survival::WeibullParams;

/// Users with covariates drawn log-uniformly, dynamics given exactly by
/// `λ = exp(ln x·β)`, `k = exp(ln x·γ)`, and i.i.d. delays drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub users: usize,
    pub events_per_user: (usize, usize),
    /// Per column: inclusive range of the covariate, sampled log-uniformly.
    /// A degenerate range `(e, e)` gives an intercept column.
    pub feature_ranges: Vec<(f64, f64)>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Added to every drawn delay, as the event-log extraction does.
    pub delay_shift: f64,
    pub seed: u64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        let e = std::f64::consts::E;
        Self {
            users: 200,
            events_per_user: (200, 400),
            feature_ranges: vec![(e, e), (1.0, 1000.0), (1.0, 100.0), (1.0, 50.0), (1.0, 20.0)],
            beta: vec![4.0, 0.3, 0.0, -0.4, 0.0],
            gamma: vec![0.2, 0.0, -0.15, 0.0, 0.2],
            delay_shift: 0.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegressionInstance {
    pub users: Vec<String>,
    pub features: FeatureMatrix,
    pub truth: Vec<WeibullParams>,
    pub samples: Vec<SubcascadeSample>,
}

pub fn gen_regression_instance(cfg: &RegressionConfig) -> Result<RegressionInstance> {
    let r = cfg.feature_ranges.len();
    if cfg.beta.len() != r || cfg.gamma.len() != r {
        return Err(Error::Config("coefficient lengths must match the feature ranges".into()));
    }
    let (lo, hi) = cfg.events_per_user;
    if cfg.users == 0 || lo == 0 || lo > hi {
        return Err(Error::Config("need users > 0 and 0 < min events <= max events".into()));
    }
    if cfg.feature_ranges.iter().any(|&(a, b)| !(a > 0.0 && a <= b)) {
        return Err(Error::Config("feature ranges must be positive and ordered".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 10, 0));
    let width = cfg.users.saturating_sub(1).to_string().len();
    let mut users = Vec::new();
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    let mut samples = Vec::new();
    for i in 0..cfg.users {
        let row: Vec<f64> = cfg
            .feature_ranges
            .iter()
            .map(|&(a, b)| if a == b { a } else { (rng.random_range(a.ln()..=b.ln())).exp() })
            .collect();
        let dot = |c: &[f64]| row.iter().zip(c).map(|(x, b)| x.ln() * b).sum::<f64>();
        let p = WeibullParams::new(dot(&cfg.beta).exp(), dot(&cfg.gamma).exp())?;
        let m = rng.random_range(lo..=hi);
        let id = format!("u{i:0width$}");
        let delays = sample_weibull_n(&p, m, derive_seed(cfg.seed, 11, i as u64))
            .into_iter()
            .map(|d| d + cfg.delay_shift)
            .collect();
        samples.push(SubcascadeSample::new(id.clone(), delays)?);
        users.push(id);
        rows.push(row);
        truth.push(p);
    }
    let names = (0..r).map(|j| format!("x{j}")).collect();
    Ok(RegressionInstance {
        users,
        features: FeatureMatrix::new(names, rows)?,
        truth,
        samples,
    })
}
