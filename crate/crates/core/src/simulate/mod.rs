//! Synthetic follower networks and cascades with known per-user dynamics.
//!
//! Every random draw flows from [`SimConfig::seed`] through
//! [`derive_seed`], one stream per network and per cascade, so outputs do
//! not depend on thread scheduling.

mod regression;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract_features, Cascade, Event, FeatureConfig, FeatureTable, Network};
use crate::survival::WeibullParams;

pub use regression::{gen_regression_instance, RegressionConfig, RegressionInstance};

const STREAM_NETWORK: u64 = 1;
const STREAM_HISTORY: u64 = 2;
const STREAM_CASCADES: u64 = 3;
const STREAM_TRUTH: u64 = 4;

/// Mixes a seed, a stream tag and an index into an independent 64-bit seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    // splitmix64 finalizer
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw from a Weibull distribution by inverse transform.
pub fn sample_weibull<R: Rng + ?Sized>(p: &WeibullParams, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], the domain of the inverse survival.
    let u = 1.0 - rng.random::<f64>();
    p.survival_inverse(u).expect("u in (0, 1]")
}

/// `n` i.i.d. Weibull draws from a seeded stream.
pub fn sample_weibull_n(p: &WeibullParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| sample_weibull(p, &mut rng)).collect()
}

/// Probability that a follower reshares a post from a given user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RetweetModel {
    Constant { p: f64 },
    /// `min(1, scale · followers(u)^exponent)` for a post by `u`.
    FollowerPower { scale: f64, exponent: f64 },
}

impl RetweetModel {
    fn probability(&self, followers: usize) -> f64 {
        match *self {
            RetweetModel::Constant { p } => p,
            RetweetModel::FollowerPower { scale, exponent } => {
                (scale * (followers.max(1) as f64).powf(exponent)).min(1.0)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RetweetModel::Constant { p } => (0.0..=1.0).contains(&p),
            RetweetModel::FollowerPower { scale, exponent } => scale >= 0.0 && scale.is_finite() && exponent.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid retweet model {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootSelection {
    Uniform,
    /// Probability proportional to `followers + 1`.
    ByFollowers,
}

/// How each user's true dynamics are set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    /// Every user shares the same parameters.
    Uniform { lambda: f64, k: f64 },
    /// History cascades are generated with `history` dynamics, covariates are
    /// extracted from them, and each user gets `λ = exp(ln x·β + ε)`,
    /// `k = exp(ln x·γ + ζ)` clamped to the bounds, with per-user Gaussian
    /// residuals `ε`, `ζ` of the given standard deviations.
    Regression {
        beta: Vec<f64>,
        gamma: Vec<f64>,
        intercept: bool,
        #[serde(default)]
        lambda_log_sd: f64,
        #[serde(default)]
        shape_log_sd: f64,
        history_lambda: f64,
        history_k: f64,
        lambda_bounds: (f64, f64),
        shape_bounds: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub nodes: usize,
    /// Exponent of the power-law density of follower counts.
    pub degree_exponent: f64,
    pub min_degree: usize,
    pub max_degree: usize,
    pub retweet: RetweetModel,
    /// Log-scale standard deviation of a per-cascade multiplier on the
    /// retweet probability (mean one); 0 disables it.
    pub appeal_sigma: f64,
    pub root_selection: RootSelection,
    pub truth: GroundTruth,
    /// Cascades used only to compute covariates for regression ground truth.
    pub history_cascades: usize,
    pub cascades: usize,
    /// Seconds after a cascade's start beyond which reshares are discarded.
    pub horizon: f64,
    /// Cascade start times are spread uniformly over this many seconds.
    pub window: f64,
    pub max_cascade_size: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nodes: 2000,
            degree_exponent: 2.5,
            min_degree: 2,
            max_degree: 1000,
            retweet: RetweetModel::FollowerPower {
                scale: 0.15,
                exponent: -0.5,
            },
            appeal_sigma: 0.0,
            root_selection: RootSelection::ByFollowers,
            truth: GroundTruth::default_regression(),
            history_cascades: 1000,
            cascades: 1000,
            horizon: 7.0 * 86_400.0,
            window: 10.0 * 86_400.0,
            max_cascade_size: 20_000,
            seed: 1,
        }
    }
}

impl GroundTruth {
    /// Intercept plus the six behavioral covariates; scale depends on the
    /// follower count and shape on the subcascade history.
    pub fn default_regression() -> Self {
        GroundTruth::Regression {
            beta: vec![6.0, -0.35, 0.0, 0.0, 0.0, 0.0, 0.4],
            gamma: vec![-0.3, 0.12, 0.0, 0.0, 0.0, 0.1, 0.0],
            intercept: true,
            lambda_log_sd: 0.0,
            shape_log_sd: 0.0,
            history_lambda: 600.0,
            history_k: 1.0,
            lambda_bounds: (5.0, 1e6),
            shape_bounds: (0.3, 5.0),
        }
    }
}

impl SimConfig {
    /// A preset where a few hubs root most of the large cascades and almost
    /// all reshares are one hop from the root. Retweet probability is
    /// constant, scaled per cascade by a lognormal appeal, and each user's
    /// dynamics carry a random effect on top of the regression.
    pub fn hub_dominated() -> Self {
        Self {
            nodes: 20_000,
            degree_exponent: 2.5,
            min_degree: 1,
            max_degree: 2000,
            retweet: RetweetModel::Constant { p: 0.04 },
            appeal_sigma: 0.7,
            root_selection: RootSelection::ByFollowers,
            truth: GroundTruth::Regression {
                beta: vec![4.5, -0.2, 1.0, 0.0, 0.0, 0.0, 0.0],
                gamma: vec![-0.8, 0.0, 0.0, 0.0, 0.0, 0.35, 0.0],
                intercept: true,
                lambda_log_sd: 1.2,
                shape_log_sd: 0.3,
                history_lambda: 600.0,
                history_k: 1.0,
                lambda_bounds: (5.0, 1e6),
                shape_bounds: (0.3, 5.0),
            },
            history_cascades: 4000,
            cascades: 20_000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::Config("nodes must be positive".into()));
        }
        if !(self.degree_exponent > 1.0 && self.degree_exponent.is_finite()) {
            return Err(Error::Config(format!("degree exponent must exceed 1, got {}", self.degree_exponent)));
        }
        if self.min_degree > self.max_degree {
            return Err(Error::Config(format!(
                "min degree {} exceeds max degree {}",
                self.min_degree, self.max_degree
            )));
        }
        if self.nodes > 1 && self.min_degree > self.nodes - 1 {
            return Err(Error::Config(format!(
                "min degree {} is impossible with {} nodes",
                self.min_degree, self.nodes
            )));
        }
        if !(self.horizon > 0.0 && self.window >= 0.0) {
            return Err(Error::Config("horizon must be positive and window nonnegative".into()));
        }
        if self.max_cascade_size == 0 {
            return Err(Error::Config("max cascade size must be positive".into()));
        }
        self.retweet.validate()?;
        if !(self.appeal_sigma >= 0.0 && self.appeal_sigma.is_finite()) {
            return Err(Error::Config(format!("appeal sigma must be nonnegative, got {}", self.appeal_sigma)));
        }
        match &self.truth {
            GroundTruth::Uniform { lambda, k } => {
                WeibullParams::new(*lambda, *k)?;
            }
            GroundTruth::Regression {
                beta,
                gamma,
                intercept,
                lambda_log_sd,
                shape_log_sd,
                history_lambda,
                history_k,
                ..
            } => {
                WeibullParams::new(*history_lambda, *history_k)?;
                if !(*lambda_log_sd >= 0.0 && lambda_log_sd.is_finite() && *shape_log_sd >= 0.0 && shape_log_sd.is_finite()) {
                    return Err(Error::Config("ground-truth residual deviations must be finite and nonnegative".into()));
                }
                let width = self.feature_config(*intercept).schema().len();
                if beta.len() != width || gamma.len() != width {
                    return Err(Error::Config(format!(
                        "ground-truth coefficients need {width} entries (intercept {intercept})"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn feature_config(&self, intercept: bool) -> FeatureConfig {
        FeatureConfig {
            intercept,
            ..FeatureConfig::default()
        }
    }
}

/// Node ids `n0000…`, zero-padded so lexicographic and numeric order agree.
pub fn node_id(i: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("n{i:0width$}")
}

/// Power-law follower counts with uniformly chosen followers.
pub fn gen_network(cfg: &SimConfig) -> Result<Network> {
    cfg.validate()?;
    let n = cfg.nodes;
    let ids: Vec<String> = (0..n).map(|i| node_id(i, n)).collect();
    let mut edges = Vec::new();
    if n > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_NETWORK, 0));
        let max = cfg.max_degree.min(n - 1);
        let tail = cfg.degree_exponent - 1.0;
        let x_min = cfg.min_degree.max(1) as f64;
        for v in 0..n {
            let u = 1.0 - rng.random::<f64>();
            let raw = (x_min * u.powf(-1.0 / tail)).floor();
            let d = if cfg.min_degree == 0 && raw <= 1.0 {
                // let min_degree 0 produce some isolated nodes
                rng.random_range(0..=1usize)
            } else {
                (raw.min(max as f64) as usize).max(cfg.min_degree)
            };
            for f in index::sample(&mut rng, n - 1, d.min(n - 1)) {
                let f = if f >= v { f + 1 } else { f };
                edges.push((ids[f].clone(), ids[v].clone()));
            }
        }
    }
    Network::new(ids, edges)
}

/// Cascades together with the delays drawn for the reshares that happened.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeBatch {
    pub cascades: Vec<Cascade>,
    /// Raw drawn delays per resharing parent.
    pub delays: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    t: f64,
    seq: u64,
    user: usize,
    parent: usize,
    delay: f64,
}

impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.t.total_cmp(&other.t).then(self.seq.cmp(&other.seq))
    }
}

/// Spreads one cascade from `root` starting at `start`.
fn spread(
    net: &Network,
    dynamics: &[WeibullParams],
    cfg: &SimConfig,
    root: usize,
    start: f64,
    appeal: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<Event>, Vec<(usize, f64)>) {
    let mut infected = vec![false; net.node_count()];
    let mut events = Vec::new();
    let mut drawn = Vec::new();
    let mut queue = BinaryHeap::new();
    let mut seq = 0u64;

    let mut infect = |u: usize, t: f64, queue: &mut BinaryHeap<Reverse<Pending>>, rng: &mut ChaCha8Rng| {
        let followers = net.followers(u);
        let p = (appeal * cfg.retweet.probability(followers.len())).min(1.0);
        if p <= 0.0 {
            return;
        }
        for &f in followers {
            if rng.random::<f64>() < p {
                let delay = sample_weibull(&dynamics[u], rng);
                let at = t + delay;
                if at - start <= cfg.horizon {
                    seq += 1;
                    queue.push(Reverse(Pending {
                        t: at,
                        seq,
                        user: f,
                        parent: u,
                        delay,
                    }));
                }
            }
        }
    };

    infected[root] = true;
    events.push(Event::new(net.id(root), None, start));
    infect(root, start, &mut queue, rng);
    while let Some(Reverse(next)) = queue.pop() {
        if events.len() >= cfg.max_cascade_size {
            break;
        }
        if infected[next.user] {
            continue;
        }
        infected[next.user] = true;
        events.push(Event::new(net.id(next.user), Some(net.id(next.parent)), next.t));
        drawn.push((next.parent, next.delay));
        infect(next.user, next.t, &mut queue, rng);
    }
    (events, drawn)
}

/// Generates `count` cascades on `net` with per-node dynamics (indexed like
/// the network), using seed stream `stream`.
pub fn gen_cascades_with(
    net: &Network,
    dynamics: &[WeibullParams],
    cfg: &SimConfig,
    count: usize,
    stream: u64,
    id_prefix: &str,
) -> Result<CascadeBatch> {
    cfg.validate()?;
    if dynamics.len() != net.node_count() {
        return Err(Error::Config(format!(
            "{} dynamics for {} nodes",
            dynamics.len(),
            net.node_count()
        )));
    }
    let weights: Vec<f64> = (0..net.node_count())
        .map(|v| match cfg.root_selection {
            RootSelection::Uniform => 1.0,
            RootSelection::ByFollowers => net.followers(v).len() as f64 + 1.0,
        })
        .collect();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("network has nodes");
    let width = count.saturating_sub(1).to_string().len();

    let results: Vec<(Cascade, Vec<(usize, f64)>)> = (0..count)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, stream, j as u64));
            let pick = rng.random::<f64>() * total;
            let root = cumulative.partition_point(|&c| c <= pick).min(net.node_count() - 1);
            let start = (rng.random::<f64>() * cfg.window).floor();
            let appeal = if cfg.appeal_sigma > 0.0 {
                let s = cfg.appeal_sigma;
                LogNormal::new(-0.5 * s * s, s).expect("validated sigma").sample(&mut rng)
            } else {
                1.0
            };
            let (events, drawn) = spread(net, dynamics, cfg, root, start, appeal, &mut rng);
            (Cascade::new(format!("{id_prefix}{j:0width$}"), events), drawn)
        })
        .collect();

    let mut delays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut cascades = Vec::with_capacity(count);
    for (c, drawn) in results {
        for (parent, d) in drawn {
            delays.entry(net.id(parent).to_string()).or_default().push(d);
        }
        cascades.push(c);
    }
    Ok(CascadeBatch { cascades, delays })
}

/// A complete synthetic data set.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub network: Network,
    /// True dynamics per node id.
    pub truth: BTreeMap<String, WeibullParams>,
    /// Covariates computed from `history` (regression ground truth only).
    pub features: Option<FeatureTable>,
    pub history: Vec<Cascade>,
    pub cascades: CascadeBatch,
}

/// Generates the network, assigns ground-truth dynamics and spreads the
/// evaluation cascades.
pub fn simulate(cfg: &SimConfig) -> Result<Simulation> {
    let network = gen_network(cfg)?;
    let n = network.node_count();
    let (dynamics, features, history) = match &cfg.truth {
        GroundTruth::Uniform { lambda, k } => (vec![WeibullParams::new(*lambda, *k)?; n], None, Vec::new()),
        GroundTruth::Regression {
            beta,
            gamma,
            intercept,
            lambda_log_sd,
            shape_log_sd,
            history_lambda,
            history_k,
            lambda_bounds,
            shape_bounds,
        } => {
            let neutral = vec![WeibullParams::new(*history_lambda, *history_k)?; n];
            let history = gen_cascades_with(&network, &neutral, cfg, cfg.history_cascades, STREAM_HISTORY, "h")?.cascades;
            let table = extract_features(&network, &history, &cfg.feature_config(*intercept))?;
            let dynamics = table
                .rows()
                .iter()
                .enumerate()
                .map(|(v, row)| {
                    let dot = |c: &[f64]| row.iter().zip(c).map(|(x, b)| x.ln() * b).sum::<f64>();
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_TRUTH, v as u64));
                    let eps: f64 = rng.sample::<f64, _>(StandardNormal) * lambda_log_sd;
                    let zeta: f64 = rng.sample::<f64, _>(StandardNormal) * shape_log_sd;
                    WeibullParams::new(
                        (dot(beta) + eps).exp().clamp(lambda_bounds.0, lambda_bounds.1),
                        (dot(gamma) + zeta).exp().clamp(shape_bounds.0, shape_bounds.1),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            (dynamics, Some(table), history)
        }
    };
    let cascades = gen_cascades_with(&network, &dynamics, cfg, cfg.cascades, STREAM_CASCADES, "c")?;
    let truth = network.ids().iter().cloned().zip(dynamics).collect();
    Ok(Simulation {
        network,
        truth,
        features,
        history,
        cascades,
    })
}

/// Number of cascades of each size.
pub fn size_histogram(cascades: &[Cascade]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for c in cascades {
        *h.entry(c.size()).or_insert(0) += 1;
    }
    h
}

#[cfg(test)]
mod tests;
