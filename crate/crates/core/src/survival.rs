//! Weibull and empirical survival functions.
//!
//! All times are in seconds. Powers `(t/λ)^k` are evaluated as
//! `exp(k·(ln t − ln λ))` so extreme shapes do not overflow intermediate
//! values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale `λ` and shape `k` of a two-parameter Weibull distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeibullParams {
    scale: f64,
    shape: f64,
}

impl WeibullParams {
    pub fn new(scale: f64, shape: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Domain(format!("scale must be positive and finite, got {scale}")));
        }
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::Domain(format!("shape must be positive and finite, got {shape}")));
        }
        Ok(Self { scale, shape })
    }

    pub fn exponential(scale: f64) -> Result<Self> {
        Self::new(scale, 1.0)
    }

    pub fn rayleigh(scale: f64) -> Result<Self> {
        Self::new(scale, 2.0)
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        self.scale
    }

    #[inline]
    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// `(t/λ)^k`, the cumulative hazard. Requires `t > 0`.
    #[inline]
    pub(crate) fn cumulative_hazard_unchecked(&self, t: f64) -> f64 {
        (self.shape * (t.ln() - self.scale.ln())).exp()
    }

    /// Probability density `(k/λ)(t/λ)^{k−1} exp(−(t/λ)^k)`.
    pub fn pdf(&self, t: f64) -> Result<f64> {
        check_positive_time(t)?;
        let z = self.cumulative_hazard_unchecked(t);
        Ok(self.hazard_unchecked(t) * (-z).exp())
    }

    /// Survival `exp(−(t/λ)^k)`; equals 1 at `t = 0`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("survival needs t >= 0, got {t}")));
        }
        Ok(self.survival_unchecked(t))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, t: f64) -> f64 {
        if t <= 0.0 {
            1.0
        } else if t.is_infinite() {
            0.0
        } else {
            (-self.cumulative_hazard_unchecked(t)).exp()
        }
    }

    /// Hazard rate `(k/λ)(t/λ)^{k−1}`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        check_positive_time(t)?;
        Ok(self.hazard_unchecked(t))
    }

    #[inline]
    fn hazard_unchecked(&self, t: f64) -> f64 {
        let k = self.shape;
        (k / self.scale) * ((k - 1.0) * (t.ln() - self.scale.ln())).exp()
    }

    /// Cumulative distribution `1 − S(t)`, computed without cancellation.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::Domain(format!("cdf needs t >= 0, got {t}")));
        }
        Ok(self.cdf_unchecked(t))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t.is_infinite() {
            1.0
        } else {
            -(-self.cumulative_hazard_unchecked(t)).exp_m1()
        }
    }

    /// The `t` with `1 − S(t) = c` for `0 <= c < 1`, without forming `1 − c`.
    #[inline]
    pub(crate) fn cdf_inverse_unchecked(&self, c: f64) -> f64 {
        if c <= 0.0 {
            return 0.0;
        }
        let neg_log = -(-c).ln_1p();
        self.scale * (neg_log.ln() / self.shape).exp()
    }

    /// Inverse survival: the `t` with `S(t) = s`, i.e. `λ(−ln s)^{1/k}`.
    pub fn survival_inverse(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Domain(format!("survival inverse needs 0 < s <= 1, got {s}")));
        }
        if s == 1.0 {
            return Ok(0.0);
        }
        let neg_log = -s.ln();
        Ok(self.scale * (neg_log.ln() / self.shape).exp())
    }
}

fn check_positive_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("expected finite t > 0, got {t}")))
    }
}

/// Free-function forms of the [`WeibullParams`] methods.
pub fn weibull_pdf(p: &WeibullParams, t: f64) -> Result<f64> {
    p.pdf(t)
}

pub fn weibull_survival(p: &WeibullParams, t: f64) -> Result<f64> {
    p.survival(t)
}

pub fn weibull_hazard(p: &WeibullParams, t: f64) -> Result<f64> {
    p.hazard(t)
}

pub fn weibull_survival_inverse(p: &WeibullParams, s: f64) -> Result<f64> {
    p.survival_inverse(s)
}

/// Sorted sample of event delays with the right-continuous survival
/// convention `S(t) = #{delays ≥ t} / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSurvival {
    delays: Vec<f64>,
}

impl EmpiricalSurvival {
    pub fn new(mut delays: Vec<f64>) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::Input("empirical survival needs at least one delay".into()));
        }
        if let Some(bad) = delays.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Input(format!("delays must be finite and nonnegative, got {bad}")));
        }
        delays.sort_by(f64::total_cmp);
        Ok(Self { delays })
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Fraction of delays `≥ t`.
    pub fn at(&self, t: f64) -> f64 {
        let below = self.delays.partition_point(|&d| d < t);
        (self.delays.len() - below) as f64 / self.delays.len() as f64
    }
}

pub fn empirical_survival_at(e: &EmpiricalSurvival, t: f64) -> f64 {
    e.at(t)
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic of `sample` against
/// the Weibull CDF, taken over the jump points of the empirical CDF.
pub fn ks_statistic(model: &WeibullParams, sample: &EmpiricalSurvival) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::Input("KS statistic of an empty sample".into()));
    }
    let n = sample.len() as f64;
    let d = sample
        .delays()
        .iter()
        .enumerate()
        .fold(0.0_f64, |acc, (i, &x)| {
            let f = model.cdf_unchecked(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            acc.max(above).max(below)
        });
    Ok(d.clamp(0.0, 1.0))
}
