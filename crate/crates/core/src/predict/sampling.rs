//! Streaming ε-approximate final-size estimator.
//!
//! Each subcascade caches the death rate `d0` from its last evaluation and
//! contributes `replies / d0` to a running total. The true death rate only
//! grows, so the cache stays within a factor `1 + ε` of it until the time
//! `S⁻¹(1 − (1+ε)·d0)`; a min-heap on those times tells the predictor which
//! subcascades to refresh when the clock advances. Replies update the total
//! in O(1) with the cached rate. Starting from the floor `1/|V|`, a
//! subcascade is refreshed at most about `log_{1+ε} |V|` times.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use super::{clamped_rate, search_outbreak, DynamicsLookup, Outbreak, PredictOptions};
use crate::error::{Error, Result};
use crate::features::Event;
use crate::survival::WeibullParams;

/// Schedules refreshes a hair early so rounding in the inverse survival
/// never lets the cached rate drift past the `1 + ε` band.
const SCHEDULE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Due(f64, usize);

impl Eq for Due {}

impl PartialOrd for Due {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Due {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

#[derive(Debug, Clone)]
struct Sub {
    joined: f64,
    params: WeibullParams,
    replies: u64,
    /// Cached death rate; meaningful once `replies > 0`.
    d0: f64,
    evaluations: u32,
}

#[derive(Debug, Clone)]
pub struct SamplingPredictor {
    epsilon: f64,
    scheduled_epsilon: f64,
    floor: f64,
    opts: PredictOptions,
    subs: Vec<Sub>,
    index: HashMap<String, usize>,
    /// Subcascades with at least one reply.
    active: Vec<usize>,
    queue: BinaryHeap<Reverse<Due>>,
    /// Σ replies / d0 over active subcascades.
    total: f64,
    clock: f64,
    evaluations: u64,
}

impl SamplingPredictor {
    pub fn new(network_size: usize, epsilon: f64, opts: PredictOptions) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if network_size == 0 {
            return Err(Error::Config("network size must be positive".into()));
        }
        opts.validate()?;
        Ok(Self {
            epsilon,
            scheduled_epsilon: epsilon * (1.0 - SCHEDULE_MARGIN),
            floor: 1.0 / network_size as f64,
            opts,
            subs: Vec::new(),
            index: HashMap::new(),
            active: Vec::new(),
            queue: BinaryHeap::new(),
            total: 0.0,
            clock: f64::NEG_INFINITY,
            evaluations: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Latest time seen by the predictor.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn observed_size(&self) -> usize {
        self.subs.len()
    }

    /// Survival evaluations of death rates so far: one when a subcascade
    /// gets its first reply, plus one per threshold refresh.
    pub fn recalculations(&self) -> u64 {
        self.evaluations
    }

    /// Evaluations per user, for users whose subcascade has replies.
    pub fn recalculations_per_subcascade(&self) -> Vec<(String, u32)> {
        let mut ids: Vec<(&String, &usize)> = self.index.iter().collect();
        ids.sort();
        ids.into_iter()
            .filter(|(_, &i)| self.subs[i].replies > 0)
            .map(|(id, &i)| (id.clone(), self.subs[i].evaluations))
            .collect()
    }

    fn elapsed(&self, s: &Sub, now: f64) -> f64 {
        now - s.joined + self.opts.time_offset
    }

    /// Evaluates the death rate of subcascade `i` at the current clock and
    /// schedules its next refresh.
    fn evaluate(&mut self, i: usize) {
        let now = self.clock;
        let s = &self.subs[i];
        let d0 = clamped_rate(&s.params, self.elapsed(s, now), self.floor);
        let target = (1.0 + self.scheduled_epsilon) * d0;
        if target < 1.0 {
            let elapsed = s.params.cdf_inverse_unchecked(target);
            let due = s.joined - self.opts.time_offset + elapsed;
            self.queue.push(Reverse(Due(due, i)));
        }
        let s = &mut self.subs[i];
        s.d0 = d0;
        s.evaluations += 1;
        self.evaluations += 1;
    }

    /// Moves the clock to `now`, refreshing every subcascade whose band expired.
    pub fn advance(&mut self, now: f64) -> Result<()> {
        if now.is_nan() || now < self.clock {
            return Err(Error::Input(format!("time {now} precedes the predictor clock {}", self.clock)));
        }
        self.clock = now;
        while let Some(&Reverse(Due(due, i))) = self.queue.peek() {
            if due > now {
                break;
            }
            self.queue.pop();
            let old = self.subs[i].replies as f64 / self.subs[i].d0;
            self.evaluate(i);
            self.total += self.subs[i].replies as f64 / self.subs[i].d0 - old;
        }
        Ok(())
    }

    /// Adds one infection. The first event must be the root; later events
    /// must name an already observed parent and arrive in time order.
    pub fn feed_event(&mut self, event: &Event, dynamics: &impl DynamicsLookup) -> Result<()> {
        if self.index.contains_key(&event.user) {
            return Err(Error::Input(format!("user {} joined twice", event.user)));
        }
        let parent = match (&event.parent, self.subs.is_empty()) {
            (None, true) => None,
            (None, false) => return Err(Error::Input(format!("second root {}", event.user))),
            (Some(_), true) => return Err(Error::Input("first event must be the root".into())),
            (Some(p), false) => Some(
                *self
                    .index
                    .get(p)
                    .ok_or_else(|| Error::Input(format!("unknown parent {p} of {}", event.user)))?,
            ),
        };
        let params = dynamics
            .dynamics(&event.user)
            .ok_or_else(|| Error::Input(format!("no dynamics for user {}", event.user)))?;
        self.advance(event.t)?;

        let idx = self.subs.len();
        self.subs.push(Sub {
            joined: event.t,
            params,
            replies: 0,
            d0: 1.0,
            evaluations: 0,
        });
        self.index.insert(event.user.clone(), idx);

        if let Some(p) = parent {
            if self.subs[p].replies == 0 {
                self.evaluate(p);
                self.active.push(p);
            }
            self.subs[p].replies += 1;
            self.total += 1.0 / self.subs[p].d0;
        }
        Ok(())
    }

    /// Estimated final size at time `now`.
    pub fn query_final(&mut self, now: f64) -> Result<f64> {
        self.advance(now)?;
        Ok(1.0 + self.total)
    }

    /// Estimated cumulative size at `t_e ≥ now`, observing up to `now`.
    /// Finite horizons evaluate one fdrate per active subcascade.
    pub fn query_size(&mut self, now: f64, t_e: f64) -> Result<f64> {
        if t_e.is_nan() || t_e < now {
            return Err(Error::Input(format!("prediction time {t_e} precedes {now}")));
        }
        self.advance(now)?;
        if t_e.is_infinite() {
            return Ok(1.0 + self.total);
        }
        let mut sum = 1.0;
        for &i in &self.active {
            let s = &self.subs[i];
            let fdrate = clamped_rate(&s.params, self.elapsed(s, t_e), self.floor);
            sum += s.replies as f64 * (fdrate / s.d0);
        }
        Ok(sum)
    }
}

impl SamplingPredictor {
    /// Outbreak search on the approximate sizes, observing up to `now`.
    pub fn outbreak_time(&mut self, now: f64, threshold: f64) -> Result<Outbreak> {
        let final_size = self.query_final(now)?;
        let observed = self.observed_size();
        let horizon = self.opts.outbreak_horizon;
        search_outbreak(now, observed, final_size, threshold, horizon, |t| self.query_size(now, t))
    }
}

/// Death-rate evaluations made by re-running the basic estimator once per
/// `step` seconds from the first to the last event: each run evaluates
/// every user observed so far.
pub fn basic_replay_operations(events: &[Event], step: f64) -> u64 {
    let (Some(first), Some(last)) = (events.first(), events.last()) else {
        return 0;
    };
    let mut ops = 0u64;
    let mut seen = 0usize;
    let mut t = first.t;
    while t <= last.t {
        while seen < events.len() && events[seen].t <= t {
            seen += 1;
        }
        ops += seen as u64;
        t += step;
    }
    ops
}
