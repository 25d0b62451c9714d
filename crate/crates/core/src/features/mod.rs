//! Covariates from the follower network and cascade history, and the
//! decomposition of cascades into per-user one-hop subcascade samples.

mod cascade;
mod network;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::fit::{FeatureMatrix, SubcascadeSample};

pub use cascade::{filter_cascades, Cascade, Event};
pub use network::Network;

/// Added to every raw delay so fitted delays satisfy `T ≥ 1`.
pub const DELAY_SHIFT: f64 = 1.0;

/// Default minimum cascade size kept for analysis.
pub const DEFAULT_MIN_CASCADE_SIZE: usize = 5;

pub const FOLLOWER_COUNT: &str = "follower_count";
pub const AVG_FOLLOWER_FOLLOWER_COUNT: &str = "avg_follower_follower_count";
pub const FOLLOWER_AVG_INFLOW_RATE: &str = "follower_avg_inflow_rate";
pub const FOLLOWER_AVG_RETWEET_RATE: &str = "follower_avg_retweet_rate";
pub const HISTORICAL_SUBCASCADE_COUNT: &str = "historical_subcascade_count";
pub const AVG_SUBCASCADE_SIZE: &str = "avg_subcascade_size";
/// Constant column equal to `e`, so its log is 1 and its coefficient acts as an intercept.
pub const INTERCEPT: &str = "intercept";

/// The six behavioral covariates in schema order.
pub const BEHAVIORAL_FEATURES: [&str; 6] = [
    FOLLOWER_COUNT,
    AVG_FOLLOWER_FOLLOWER_COUNT,
    FOLLOWER_AVG_INFLOW_RATE,
    FOLLOWER_AVG_RETWEET_RATE,
    HISTORICAL_SUBCASCADE_COUNT,
    AVG_SUBCASCADE_SIZE,
];

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Which covariates to emit, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    pub intercept: bool,
    pub columns: Vec<String>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            intercept: true,
            columns: BEHAVIORAL_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl FeatureConfig {
    pub fn schema(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.intercept {
            names.push(INTERCEPT.to_string());
        }
        names.extend(self.columns.iter().cloned());
        names
    }

    fn validate(&self) -> Result<()> {
        for c in &self.columns {
            if !BEHAVIORAL_FEATURES.contains(&c.as_str()) {
                return Err(Error::Config(format!("unknown feature column {c}")));
            }
        }
        Ok(())
    }
}

/// Covariate rows for every node of a network, in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, ids: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::Input("feature ids and rows differ in length".into()));
        }
        // Validates positivity and row widths.
        FeatureMatrix::new(names.clone(), rows.clone())?;
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self { names, ids, rows, index })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.rows[i].as_slice())
    }

    /// Feature matrix for `users`, in the given order.
    pub fn matrix_for<'a>(&self, users: impl IntoIterator<Item = &'a str>) -> Result<FeatureMatrix> {
        let rows = users
            .into_iter()
            .map(|u| {
                self.row(u)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::Input(format!("no feature row for user {u}")))
            })
            .collect::<Result<Vec<_>>>()?;
        FeatureMatrix::new(self.names.clone(), rows)
    }
}

/// Splits cascades into one-hop subcascades: each non-root event adds the
/// delay `t_child − t_parent + 1` to its parent's sample. Users with no
/// children get no sample. Output is keyed by user id.
pub fn extract_subcascades(cascades: &[Cascade]) -> Result<BTreeMap<String, SubcascadeSample>> {
    let mut delays: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for c in cascades {
        let parents = c.parent_positions()?;
        for (e, parent) in c.events.iter().zip(parents) {
            if let Some(p) = parent {
                let owner = &c.events[p];
                delays
                    .entry(owner.user.clone())
                    .or_default()
                    .push(e.t - owner.t + DELAY_SHIFT);
            }
        }
    }
    delays
        .into_iter()
        .map(|(user, d)| SubcascadeSample::new(user.clone(), d).map(|s| (user, s)))
        .collect()
}

/// Per-node activity counted over a set of cascades.
#[derive(Debug, Default, Clone)]
struct Activity {
    posts: Vec<u64>,
    retweets: Vec<u64>,
    participations: Vec<u64>,
    parent_cascades: Vec<u64>,
    children: Vec<u64>,
    window_days: f64,
}

fn count_activity(net: &Network, cascades: &[Cascade]) -> Result<Activity> {
    let n = net.node_count();
    let mut act = Activity {
        posts: vec![0; n],
        retweets: vec![0; n],
        participations: vec![0; n],
        parent_cascades: vec![0; n],
        children: vec![0; n],
        window_days: 1.0,
    };
    let (mut t_min, mut t_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in cascades {
        let parents = c.parent_positions()?;
        let idx = c
            .events
            .iter()
            .map(|e| {
                net.index_of(&e.user).ok_or_else(|| {
                    Error::Input(format!("cascade {}: user {} is not in the network", c.id, e.user))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut kids = vec![0u64; c.events.len()];
        for (i, parent) in parents.iter().enumerate() {
            let u = idx[i];
            act.posts[u] += 1;
            act.participations[u] += 1;
            if let Some(p) = parent {
                act.retweets[u] += 1;
                kids[*p] += 1;
            }
        }
        for (i, &k) in kids.iter().enumerate() {
            if k > 0 {
                act.parent_cascades[idx[i]] += 1;
                act.children[idx[i]] += k;
            }
        }
        t_min = t_min.min(c.start_time());
        t_max = t_max.max(c.last_time());
    }
    if t_max > t_min {
        act.window_days = ((t_max - t_min) / SECONDS_PER_DAY).max(1.0);
    }
    Ok(act)
}

/// Computes the configured covariates for every network node.
///
/// Follower aggregates are weighted means over a node's followers with
/// weight `retweets(f) + 1`, so a follower with no history still counts and
/// a history-free population is weighted uniformly. Every entry is
/// add-one smoothed, so all values are at least 1.
pub fn extract_features(net: &Network, cascades: &[Cascade], cfg: &FeatureConfig) -> Result<FeatureTable> {
    cfg.validate()?;
    let act = count_activity(net, cascades)?;
    let n = net.node_count();

    let received: Vec<f64> = (0..n)
        .map(|v| net.followees(v).iter().map(|&g| act.posts[g] as f64).sum())
        .collect();
    let inflow: Vec<f64> = received.iter().map(|r| r / act.window_days).collect();
    let retweet_rate: Vec<f64> = (0..n)
        .map(|v| {
            if received[v] > 0.0 {
                act.retweets[v] as f64 / received[v]
            } else {
                0.0
            }
        })
        .collect();
    let follower_count: Vec<f64> = (0..n).map(|v| net.followers(v).len() as f64).collect();

    let weighted_mean = |v: usize, values: &[f64]| -> f64 {
        let followers = net.followers(v);
        if followers.is_empty() {
            return 0.0;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for &f in followers {
            let w = act.retweets[f] as f64 + 1.0;
            num += w * values[f];
            den += w;
        }
        num / den
    };

    let schema = cfg.schema();
    let rows = (0..n)
        .map(|v| {
            schema
                .iter()
                .map(|name| match name.as_str() {
                    INTERCEPT => std::f64::consts::E,
                    FOLLOWER_COUNT => follower_count[v] + 1.0,
                    AVG_FOLLOWER_FOLLOWER_COUNT => weighted_mean(v, &follower_count) + 1.0,
                    FOLLOWER_AVG_INFLOW_RATE => weighted_mean(v, &inflow) + 1.0,
                    FOLLOWER_AVG_RETWEET_RATE => weighted_mean(v, &retweet_rate) + 1.0,
                    HISTORICAL_SUBCASCADE_COUNT => act.parent_cascades[v] as f64 + 1.0,
                    AVG_SUBCASCADE_SIZE => {
                        if act.participations[v] > 0 {
                            act.children[v] as f64 / act.participations[v] as f64 + 1.0
                        } else {
                            1.0
                        }
                    }
                    other => unreachable!("validated column {other}"),
                })
                .collect()
        })
        .collect();
    FeatureTable::new(schema, net.ids().to_vec(), rows)
}
