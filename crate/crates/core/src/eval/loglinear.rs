//! Log-linear regression of final cascade size on early-stage features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Network;
use crate::predict::PartialCascade;

pub const LOG_LINEAR_FEATURES: [&str; 6] = [
    "ln_early_size",
    "ln_speed",
    "ln_root_followers",
    "ln_mean_followers",
    "max_depth",
    "mean_depth",
];

/// Early-stage features of an observed prefix, in [`LOG_LINEAR_FEATURES`] order.
pub fn cascade_features(pc: &PartialCascade, net: &Network) -> Result<Vec<f64>> {
    let c = pc.cascade();
    let parents = c.parent_positions()?;
    let mut depth = vec![0usize; c.size()];
    for (i, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            depth[i] = depth[*p] + 1;
        }
    }
    let followers = |user: &str| net.index_of(user).map_or(0, |v| net.followers(v).len()) as f64;
    let n = c.size() as f64;
    let elapsed = pc.t_limit() - c.start_time();
    let mean_followers = c.events.iter().map(|e| followers(&e.user)).sum::<f64>() / n;
    Ok(vec![
        n.ln(),
        (n / (elapsed + 1.0)).ln(),
        (followers(&c.events[0].user) + 1.0).ln(),
        (mean_followers + 1.0).ln(),
        *depth.iter().max().unwrap() as f64,
        depth.iter().sum::<usize>() as f64 / n,
    ])
}

/// `ln(size) = w₀ + w·features`, fitted by least squares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLinearModel {
    pub weights: Vec<f64>,
}

impl LogLinearModel {
    /// Least-squares fit; rank-deficient designs (for example a constant
    /// early size) get the minimum-norm solution.
    pub fn fit(features: &[Vec<f64>], sizes: &[f64]) -> Result<Self> {
        if features.is_empty() || features.len() != sizes.len() {
            return Err(Error::Input("log-linear fit needs matching, nonempty features and sizes".into()));
        }
        let width = features[0].len() + 1;
        let x = DMatrix::from_fn(features.len(), width, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
        let y = DVector::from_iterator(sizes.len(), sizes.iter().map(|s| s.ln()));
        let w = x
            .svd(true, true)
            .solve(&y, 1e-10)
            .map_err(|e| Error::Input(format!("log-linear fit failed: {e}")))?;
        Ok(Self {
            weights: w.iter().copied().collect(),
        })
    }

    pub fn predict(&self, features: &[f64]) -> f64 {
        let z = self.weights[0]
            + self.weights[1..]
                .iter()
                .zip(features)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        z.exp()
    }
}
