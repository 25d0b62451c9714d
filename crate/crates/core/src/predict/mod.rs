//! Cascade-level prediction from per-user dynamics.
//!
//! The basic estimator treats each observed user as the owner of a one-hop
//! subcascade whose observed replies are a `deathrate` fraction of its final
//! size:
//!
//! ```text
//! size(t_e) = 1 + Σ_u replynum(u) · fdrate(u, t_e) / deathrate(u)
//! deathrate(u) = max(1 − S_u(t_limit − t(u) + δ), 1/|V|)
//! fdrate(u, t_e) = max(1 − S_u(t_e − t(u) + δ), 1/|V|)
//! ```
//!
//! where `δ` is the delay shift used when fitting (one second by default).

mod dynamics;
mod sampling;

use crate::error::{Error, Result};
use crate::features::Cascade;
use crate::survival::WeibullParams;

pub use dynamics::{DynamicsLookup, DynamicsSource, ModelDynamics};
pub use sampling::{basic_replay_operations, SamplingPredictor};

/// Default search window for outbreak times: 30 days.
pub const DEFAULT_OUTBREAK_HORIZON: f64 = 30.0 * 86_400.0;

/// The outbreak size threshold used in the experiments.
pub const DEFAULT_OUTBREAK_THRESHOLD: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictOptions {
    /// Added to elapsed times before evaluating survival, matching the
    /// delay shift applied when fitting.
    pub time_offset: f64,
    /// Outbreak search covers `[t_limit, t_limit + outbreak_horizon]`.
    pub outbreak_horizon: f64,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            time_offset: crate::features::DELAY_SHIFT,
            outbreak_horizon: DEFAULT_OUTBREAK_HORIZON,
        }
    }
}

impl PredictOptions {
    fn validate(&self) -> Result<()> {
        if !(self.time_offset.is_finite() && self.time_offset >= 0.0) {
            return Err(Error::Config(format!("time offset must be >= 0, got {}", self.time_offset)));
        }
        if !(self.outbreak_horizon.is_finite() && self.outbreak_horizon >= 0.0) {
            return Err(Error::Config(format!(
                "outbreak horizon must be >= 0, got {}",
                self.outbreak_horizon
            )));
        }
        Ok(())
    }
}

/// The events of a cascade observed up to `t_limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCascade {
    cascade: Cascade,
    t_limit: f64,
    network_size: usize,
}

impl PartialCascade {
    pub fn new(cascade: Cascade, t_limit: f64, network_size: usize) -> Result<Self> {
        cascade.validate()?;
        if network_size == 0 {
            return Err(Error::Input("network size must be positive".into()));
        }
        if !t_limit.is_finite() || t_limit < cascade.last_time() {
            return Err(Error::Input(format!(
                "cascade {}: t_limit {t_limit} precedes the last observed event at {}",
                cascade.id,
                cascade.last_time()
            )));
        }
        Ok(Self {
            cascade,
            t_limit,
            network_size,
        })
    }

    /// Everything at or before `t_limit`.
    pub fn observe_until(full: &Cascade, t_limit: f64, network_size: usize) -> Result<Self> {
        Self::new(full.observed_until(t_limit), t_limit, network_size)
    }

    /// The first `count` events, observed up to the time of the last of them.
    pub fn observe_prefix(full: &Cascade, count: usize, network_size: usize) -> Result<Self> {
        let prefix = full.prefix(count);
        let t_limit = prefix.last_time();
        Self::new(prefix, t_limit, network_size)
    }

    pub fn cascade(&self) -> &Cascade {
        &self.cascade
    }

    pub fn t_limit(&self) -> f64 {
        self.t_limit
    }

    pub fn network_size(&self) -> usize {
        self.network_size
    }

    pub fn observed_size(&self) -> usize {
        self.cascade.size()
    }
}

/// `max(1 − S(elapsed), floor)`.
#[inline]
pub(crate) fn clamped_rate(p: &WeibullParams, elapsed: f64, floor: f64) -> f64 {
    p.cdf_unchecked(elapsed).max(floor)
}

#[derive(Debug, Clone)]
struct Subcascade {
    joined: f64,
    replies: u64,
    params: WeibullParams,
    deathrate: f64,
}

/// Algorithm-1 state for one partial cascade: the observed subcascades with
/// their reply counts and death rates, ready to be evaluated at any horizon.
#[derive(Debug, Clone)]
pub struct BasicPredictor {
    subcascades: Vec<Subcascade>,
    observed: usize,
    t_limit: f64,
    floor: f64,
    opts: PredictOptions,
}

impl BasicPredictor {
    pub fn new(pc: &PartialCascade, dynamics: &impl DynamicsLookup, opts: PredictOptions) -> Result<Self> {
        opts.validate()?;
        let events = &pc.cascade.events;
        let parents = pc.cascade.parent_positions()?;
        let mut replies = vec![0u64; events.len()];
        for p in parents.into_iter().flatten() {
            replies[p] += 1;
        }
        let floor = 1.0 / pc.network_size as f64;
        let subcascades = events
            .iter()
            .zip(replies)
            .map(|(e, replies)| {
                let params = dynamics.dynamics(&e.user).ok_or_else(|| {
                    Error::Input(format!("cascade {}: no dynamics for user {}", pc.cascade.id, e.user))
                })?;
                let deathrate = clamped_rate(&params, pc.t_limit - e.t + opts.time_offset, floor);
                Ok(Subcascade {
                    joined: e.t,
                    replies,
                    params,
                    deathrate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            subcascades,
            observed: events.len(),
            t_limit: pc.t_limit,
            floor,
            opts,
        })
    }

    pub fn observed_size(&self) -> usize {
        self.observed
    }

    pub fn t_limit(&self) -> f64 {
        self.t_limit
    }

    /// Predicted cumulative size at `t_e`; `f64::INFINITY` gives the final size.
    pub fn size_at(&self, t_e: f64) -> Result<f64> {
        if t_e.is_nan() || t_e < self.t_limit {
            return Err(Error::Input(format!(
                "prediction time {t_e} precedes t_limit {}",
                self.t_limit
            )));
        }
        let mut sum = 1.0;
        for s in self.subcascades.iter().filter(|s| s.replies > 0) {
            let fdrate = clamped_rate(&s.params, t_e - s.joined + self.opts.time_offset, self.floor);
            sum += s.replies as f64 * (fdrate / s.deathrate);
        }
        Ok(sum)
    }

    /// Predicted final size: every fdrate is 1.
    pub fn final_size(&self) -> f64 {
        1.0 + self
            .subcascades
            .iter()
            .filter(|s| s.replies > 0)
            .map(|s| s.replies as f64 / s.deathrate)
            .sum::<f64>()
    }

    /// Earliest whole second after `t_limit` at which the predicted size
    /// reaches `threshold`, searched up to the outbreak horizon.
    pub fn outbreak_time(&self, threshold: f64) -> Result<Outbreak> {
        search_outbreak(
            self.t_limit,
            self.observed,
            self.final_size(),
            threshold,
            self.opts.outbreak_horizon,
            |t| self.size_at(t),
        )
    }

    /// Predicted sizes on a sorted grid of times at or after `t_limit`.
    pub fn process(&self, grid: &[f64]) -> Result<ProcessCurve> {
        if grid.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[0] > w[1]) {
            return Err(Error::Input("process grid must be sorted".into()));
        }
        let points = grid
            .iter()
            .map(|&t| Ok((t, self.size_at(t)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ProcessCurve { points })
    }
}

/// Result of an outbreak-time search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outbreak {
    At(f64),
    Never,
}

impl Outbreak {
    pub fn time(&self) -> Option<f64> {
        match self {
            Outbreak::At(t) => Some(*t),
            Outbreak::Never => None,
        }
    }
}

/// Binary search over whole seconds in `[t_limit, t_limit + horizon]` for
/// the first time `size_at` reaches `threshold`. `size_at` must be
/// nondecreasing; `final_size` is its limit.
pub fn search_outbreak(
    t_limit: f64,
    observed: usize,
    final_size: f64,
    threshold: f64,
    horizon: f64,
    mut size_at: impl FnMut(f64) -> Result<f64>,
) -> Result<Outbreak> {
    if threshold.is_nan() || threshold < 1.0 {
        return Err(Error::Input(format!("outbreak threshold must be >= 1, got {threshold}")));
    }
    if observed as f64 >= threshold {
        return Ok(Outbreak::At(t_limit));
    }
    if final_size < threshold {
        return Ok(Outbreak::Never);
    }
    let max_steps = horizon.floor() as u64;
    let mut reached = |d: u64| -> Result<bool> { Ok(size_at(t_limit + d as f64)? >= threshold) };
    if !reached(max_steps)? {
        return Ok(Outbreak::Never);
    }
    if reached(0)? {
        return Ok(Outbreak::At(t_limit));
    }
    // Invariant: not reached at lo, reached at hi.
    let (mut lo, mut hi) = (0u64, max_steps);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reached(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Outbreak::At(t_limit + hi as f64))
}

/// Predicted cumulative size over time.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessCurve {
    pub points: Vec<(f64, f64)>,
}

pub fn predict_size_basic(
    pc: &PartialCascade,
    dynamics: &impl DynamicsLookup,
    t_e: f64,
    opts: PredictOptions,
) -> Result<f64> {
    BasicPredictor::new(pc, dynamics, opts)?.size_at(t_e)
}

pub fn predict_final_size(pc: &PartialCascade, dynamics: &impl DynamicsLookup, opts: PredictOptions) -> Result<f64> {
    Ok(BasicPredictor::new(pc, dynamics, opts)?.final_size())
}

pub fn predict_outbreak_time(
    pc: &PartialCascade,
    dynamics: &impl DynamicsLookup,
    threshold: f64,
    opts: PredictOptions,
) -> Result<Outbreak> {
    BasicPredictor::new(pc, dynamics, opts)?.outbreak_time(threshold)
}

pub fn predict_process(
    pc: &PartialCascade,
    dynamics: &impl DynamicsLookup,
    grid: &[f64],
    opts: PredictOptions,
) -> Result<ProcessCurve> {
    BasicPredictor::new(pc, dynamics, opts)?.process(grid)
}
