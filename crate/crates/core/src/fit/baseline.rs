//! Survival baselines: Exponential, Rayleigh, Cox-style shared shape and
//! unregularized per-user Weibull.

use serde::{Deserialize, Serialize};

use super::newton::{self, Eval, NewtonOptions};
use super::{
    fit_newer, fitted_users, shape_term, validate_problem, FeatureMatrix, Hyperparams, ModelKind, NewerModel,
    SolverOptions, SubcascadeSample,
};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Exponential,
    Rayleigh,
    CoxSharedShape,
    PlainWeibull,
}

/// MLE scale for a fixed shape: `λ = (Σ T^k / m)^{1/k}`.
fn closed_form_log_scale(s: &SubcascadeSample, k: f64) -> f64 {
    // log-sum-exp keeps Σ T^k finite for large shapes
    let scaled: Vec<f64> = s.log_delays.iter().map(|l| k * l).collect();
    let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = top + scaled.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
    (lse - s.m().ln()) / k
}

/// Fits a baseline. Scale regressions for out-of-sample users use the β
/// LASSO with `hyper.alpha_beta`; the plain Weibull baseline ignores `hyper`
/// and runs NEWER with `μ = η = 0`.
pub fn fit_baseline(
    kind: BaselineKind,
    samples: &[SubcascadeSample],
    x: &FeatureMatrix,
    hyper: Hyperparams,
    opts: &SolverOptions,
) -> Result<NewerModel> {
    validate_problem(samples, x, &hyper)?;
    let (model_kind, log_lambda, log_k) = match kind {
        BaselineKind::PlainWeibull => {
            let (model, _) = fit_newer(samples, x, Hyperparams::unregularized(), opts)?;
            return Ok(model);
        }
        BaselineKind::Exponential | BaselineKind::Rayleigh => {
            let k: f64 = if kind == BaselineKind::Exponential { 1.0 } else { 2.0 };
            let log_lambda: Vec<f64> = samples.iter().map(|s| closed_form_log_scale(s, k)).collect();
            let model_kind = if k == 1.0 {
                ModelKind::Exponential
            } else {
                ModelKind::Rayleigh
            };
            (model_kind, log_lambda, vec![k.ln(); samples.len()])
        }
        BaselineKind::CoxSharedShape => {
            let log_k = fit_shared_shape(samples, opts);
            let k = log_k.exp();
            let log_lambda = samples.iter().map(|s| closed_form_log_scale(s, k)).collect();
            (ModelKind::Cox, log_lambda, vec![log_k; samples.len()])
        }
    };
    let (lam_lo, lam_hi) = opts.lambda_bounds;
    let log_lambda: Vec<f64> = log_lambda
        .into_iter()
        .map(|a| a.clamp(lam_lo.ln(), lam_hi.ln()))
        .collect();
    let beta = x
        .log_design()
        .lasso(&log_lambda, hyper.alpha_beta, &vec![0.0; x.n_cols()], opts.lasso);
    let users = fitted_users(samples, &log_lambda, &log_k)?;
    NewerModel::assemble(
        model_kind,
        x.names().to_vec(),
        hyper,
        beta,
        vec![0.0; x.n_cols()],
        users,
    )
}

/// Alternates a shared-shape Newton solve with closed-form per-user scales.
/// Returns `ln k`.
fn fit_shared_shape(samples: &[SubcascadeSample], opts: &SolverOptions) -> f64 {
    let (lo, hi) = (opts.shape_bounds.0.ln(), opts.shape_bounds.1.ln());
    let total_m: f64 = samples.iter().map(|s| s.m()).sum();
    let mut b = 0.0_f64;
    for _ in 0..500 {
        let k = b.exp();
        let log_lambda: Vec<f64> = samples.iter().map(|s| closed_form_log_scale(s, k)).collect();
        let shared = |b: f64| {
            samples.iter().zip(&log_lambda).fold(
                Eval {
                    value: 0.0,
                    grad: 0.0,
                    hess: 0.0,
                },
                |acc, (s, &a)| {
                    let e = shape_term(s, a, b, 0.0, 0.0);
                    Eval {
                        value: acc.value + e.value,
                        grad: acc.grad + e.grad,
                        hess: acc.hess + e.hess,
                    }
                },
            )
        };
        let newton = NewtonOptions {
            grad_tol: opts.newton.grad_tol * (1.0 + total_m),
            ..opts.newton
        };
        let next = newton::minimize(shared, b, lo, hi, newton);
        let done = (next - b).abs() < 1e-13;
        b = next;
        if done {
            break;
        }
    }
    b
}
