use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::features::Cascade;

/// How a cascade's reshares are spread over its participants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeDominance {
    pub cascade: String,
    /// `(user, children / (size − 1))`, largest first; users without children omitted.
    pub shares: Vec<(String, f64)>,
    /// Running sum of `shares`.
    pub cumulative: Vec<f64>,
    /// Join times, as a fraction of the cascade duration, of the fewest users
    /// that together produced at least half of the children.
    pub top_join_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub cascades: Vec<CascadeDominance>,
    /// 25th, 50th and 75th percentiles of all `top_join_fractions`.
    pub join_fraction_quartiles: Option<[f64; 3]>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn dominance_report(cascades: &[Cascade]) -> Result<DominanceReport> {
    let mut out = Vec::with_capacity(cascades.len());
    let mut fractions = Vec::new();
    for c in cascades {
        let parents = c.parent_positions()?;
        let mut kids = vec![0usize; c.size()];
        for p in parents.iter().flatten() {
            kids[*p] += 1;
        }
        let total = (c.size() - 1) as f64;
        let mut order: Vec<usize> = (0..c.size()).filter(|&i| kids[i] > 0).collect();
        order.sort_by(|&a, &b| kids[b].cmp(&kids[a]).then(c.events[a].user.cmp(&c.events[b].user)));
        let shares: Vec<(String, f64)> = order
            .iter()
            .map(|&i| (c.events[i].user.clone(), kids[i] as f64 / total))
            .collect();
        let cumulative: Vec<f64> = shares
            .iter()
            .scan(0.0, |acc, (_, s)| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        let duration = c.last_time() - c.start_time();
        let top = cumulative.iter().position(|&v| v >= 0.5).map_or(0, |p| p + 1);
        let top_join_fractions: Vec<f64> = order[..top]
            .iter()
            .map(|&i| {
                if duration > 0.0 {
                    (c.events[i].t - c.start_time()) / duration
                } else {
                    0.0
                }
            })
            .collect();
        fractions.extend_from_slice(&top_join_fractions);
        out.push(CascadeDominance {
            cascade: c.id.clone(),
            shares,
            cumulative,
            top_join_fractions,
        });
    }
    fractions.sort_by(f64::total_cmp);
    let join_fraction_quartiles = (!fractions.is_empty())
        .then(|| [quantile(&fractions, 0.25), quantile(&fractions, 0.5), quantile(&fractions, 0.75)]);
    Ok(DominanceReport {
        cascades: out,
        join_fraction_quartiles,
    })
}

/// Children generated by each user summed over all cascades.
pub fn pooled_child_counts(cascades: &[Cascade]) -> Result<BTreeMap<String, u64>> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for c in cascades {
        for (e, p) in c.events.iter().zip(c.parent_positions()?) {
            counts.entry(e.user.clone()).or_insert(0);
            if let Some(p) = p {
                *counts.entry(c.events[p].user.clone()).or_insert(0) += 1;
            }
        }
    }
    Ok(counts)
}

/// Share of all children produced by the top `fraction` of participating users.
pub fn top_fraction_share(counts: &BTreeMap<String, u64>, fraction: f64) -> f64 {
    let mut v: Vec<u64> = counts.values().copied().collect();
    let total: u64 = v.iter().sum();
    if total == 0 || v.is_empty() {
        return 0.0;
    }
    v.sort_unstable_by(|a, b| b.cmp(a));
    let k = ((fraction * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[..k].iter().sum::<u64>() as f64 / total as f64
}
