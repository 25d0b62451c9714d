//! NEWER: joint Weibull maximum likelihood over per-user response delays,
//! with the log-parameters tied to log-covariates by ℓ1-penalized linear
//! regressions.
//!
//! The objective minimized by [`fit_newer`] is
//!
//! ```text
//! F(λ, k, β, γ) = −Σ_i l_i(λ_i, k_i)
//!               + μ [ (1/2N)‖log λ − log X·β‖² + α_β‖β‖₁ ]
//!               + η [ (1/2N)‖log k − log X·γ‖² + α_γ‖γ‖₁ ]
//! ```
//!
//! and is solved by block coordinate descent in the order λ, k, β, γ. The
//! per-user λ and k blocks are independent one-dimensional problems solved
//! with safeguarded Newton in log-parameter space; β and γ are LASSO
//! problems solved by cyclic coordinate descent.

mod baseline;
pub mod lasso;
mod model;
pub mod newton;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{EmpiricalSurvival, WeibullParams};

pub use baseline::{fit_baseline, BaselineKind};
use lasso::{Design, LassoOptions};
pub use model::{FittedUser, ModelKind, NewerModel, OutOfSampleRule, MODEL_SCHEMA_VERSION};
use newton::{Eval, NewtonOptions};

/// The response delays observed for one user across all of their subcascades.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcascadeSample {
    user: String,
    delays: Vec<f64>,
    log_delays: Vec<f64>,
    sum_log: f64,
}

impl SubcascadeSample {
    /// Delays must be finite and positive; they are sorted on construction.
    pub fn new(user: impl Into<String>, mut delays: Vec<f64>) -> Result<Self> {
        let user = user.into();
        if delays.is_empty() {
            return Err(Error::Input(format!("user {user} has an empty subcascade sample")));
        }
        if let Some(bad) = delays.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(Error::Input(format!("user {user} has a non-positive delay {bad}")));
        }
        delays.sort_by(f64::total_cmp);
        let log_delays: Vec<f64> = delays.iter().map(|d| d.ln()).collect();
        let sum_log = log_delays.iter().sum();
        Ok(Self {
            user,
            delays,
            log_delays,
            sum_log,
        })
    }

    pub fn user(&self) -> &str {
        &self.user
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

    /// True when every delay is at least one second and the largest exceeds one,
    /// the floor produced by the +1 s delay shift.
    pub fn meets_unit_floor(&self) -> bool {
        self.delays[0] >= 1.0 && *self.delays.last().unwrap() > 1.0
    }

    pub fn empirical(&self) -> EmpiricalSurvival {
        EmpiricalSurvival::new(self.delays.clone()).expect("sample is nonempty and positive")
    }

    fn m(&self) -> f64 {
        self.delays.len() as f64
    }
}

/// Strictly positive covariates, one row per user, with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Input(format!(
                    "feature row {i} has {} entries, schema has {}",
                    row.len(),
                    names.len()
                )));
            }
            check_feature_row(row)?;
        }
        Ok(Self { names, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    fn log_design(&self) -> Design {
        let logs: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.ln()).collect())
            .collect();
        Design::from_rows(&logs, self.n_cols())
    }
}

pub(crate) fn check_feature_row(row: &[f64]) -> Result<()> {
    match row.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(bad) => Err(Error::Domain(format!("features must be positive and finite, got {bad}"))),
        None => Ok(()),
    }
}

/// Weights of the regression penalties and their ℓ1 terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub mu: f64,
    pub eta: f64,
    pub alpha_beta: f64,
    pub alpha_gamma: f64,
}

impl Default for Hyperparams {
    /// μ = 10, η = 10, α_β = 6e−5, α_γ = 8e−6.
    fn default() -> Self {
        Self {
            mu: 10.0,
            eta: 10.0,
            alpha_beta: 6e-5,
            alpha_gamma: 8e-6,
        }
    }
}

impl Hyperparams {
    /// Plain per-user Weibull maximum likelihood.
    pub fn unregularized() -> Self {
        Self {
            mu: 0.0,
            eta: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("eta", self.eta),
            ("alpha_beta", self.alpha_beta),
            ("alpha_gamma", self.alpha_gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Starting point for a fit, aligned with the sample order.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialState {
    pub lambda: Vec<f64>,
    pub k: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl InitialState {
    /// Starts from a saved model: users it fitted keep their parameters,
    /// others start from its regression on their covariate rows.
    pub fn from_model(model: &NewerModel, samples: &[SubcascadeSample], x: &FeatureMatrix) -> Result<Self> {
        if model.feature_names() != x.names() {
            return Err(Error::Input(format!(
                "warm-start model has features {:?}, data has {:?}",
                model.feature_names(),
                x.names()
            )));
        }
        if samples.len() != x.n_rows() {
            return Err(Error::Input("samples and feature rows differ in length".into()));
        }
        let (mut lambda, mut k) = (Vec::with_capacity(samples.len()), Vec::with_capacity(samples.len()));
        for (s, row) in samples.iter().zip(x.rows()) {
            let p = match model.fitted(s.user()) {
                Some(u) => u.params,
                None => model.out_of_sample(row)?,
            };
            lambda.push(p.scale());
            k.push(p.shape());
        }
        Ok(Self {
            lambda,
            k,
            beta: model.beta().to_vec(),
            gamma: model.gamma().to_vec(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_outer: usize,
    /// Relative objective decrease below which the outer loop may stop.
    pub rel_tol: f64,
    /// The outer loop also requires every per-user partial derivative of the
    /// smooth part (in λ and k) to be below this.
    pub grad_tol: f64,
    pub lambda_bounds: (f64, f64),
    pub shape_bounds: (f64, f64),
    /// Pins every shape to this value and skips the k block.
    pub fixed_shape: Option<f64>,
    pub newton: NewtonOptions,
    pub lasso: LassoOptions,
    pub init: Option<InitialState>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_outer: 200,
            rel_tol: 1e-7,
            grad_tol: 1e-6,
            lambda_bounds: (1e-6, 1e9),
            shape_bounds: (1e-2, 50.0),
            fixed_shape: None,
            newton: NewtonOptions::default(),
            lasso: LassoOptions::default(),
            init: None,
        }
    }
}

/// Outer-loop trace of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Objective before the first iteration followed by one value per iteration.
    pub objective: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest projected partial derivative in λ or k at the final iterate.
    pub max_gradient: f64,
}

/// `l_i(λ, k) = m ln k + (k−1) Σ ln T_j − m k ln λ − λ^{−k} Σ T_j^k`.
pub fn user_log_likelihood(p: &WeibullParams, s: &SubcascadeSample) -> f64 {
    -neg_log_lik(s, p.scale().ln(), p.shape())
}

fn neg_log_lik(s: &SubcascadeSample, a: f64, k: f64) -> f64 {
    let m = s.m();
    let powered: f64 = s.log_delays.iter().map(|l| (k * (l - a)).exp()).sum();
    -(m * k.ln() + (k - 1.0) * s.sum_log - m * k * a - powered)
}

/// λ-block term in `a = ln λ`, up to constants.
fn scale_term(s: &SubcascadeSample, a: f64, k: f64, target: f64, pen: f64) -> Eval {
    let m = s.m();
    let powered: f64 = s.log_delays.iter().map(|l| (k * (l - a)).exp()).sum();
    Eval {
        value: m * k * a + powered + 0.5 * pen * (a - target).powi(2),
        grad: m * k - k * powered + pen * (a - target),
        hess: k * k * powered + pen,
    }
}

/// k-block term in `b = ln k`, up to constants.
fn shape_term(s: &SubcascadeSample, a: f64, b: f64, target: f64, pen: f64) -> Eval {
    let m = s.m();
    let k = b.exp();
    let (mut powered, mut first, mut second) = (0.0, 0.0, 0.0);
    for l in &s.log_delays {
        let c = l - a;
        let e = (k * c).exp();
        powered += e;
        first += c * (e - 1.0);
        second += c * c * e;
    }
    Eval {
        value: -m * b - (k - 1.0) * s.sum_log + m * k * a + powered + 0.5 * pen * (b - target).powi(2),
        grad: -m + k * first + pen * (b - target),
        hess: k * first + k * k * second + pen,
    }
}

/// Data and penalty structure of one NEWER problem.
struct Problem<'a> {
    samples: &'a [SubcascadeSample],
    design: Design,
    hyper: Hyperparams,
}

#[derive(Debug, Clone)]
struct State {
    log_lambda: Vec<f64>,
    log_k: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
}

impl Problem<'_> {
    fn n(&self) -> f64 {
        self.samples.len() as f64
    }

    fn user_terms(&self, st: &State) -> Vec<f64> {
        self.samples
            .iter()
            .zip(st.log_lambda.iter().zip(&st.log_k))
            .map(|(s, (&a, &b))| neg_log_lik(s, a, b.exp()))
            .collect()
    }

    fn objective(&self, st: &State) -> std::result::Result<f64, usize> {
        let terms = self.user_terms(st);
        if let Some(i) = terms.iter().position(|t| !t.is_finite()) {
            return Err(i);
        }
        let g1: f64 = terms.iter().sum();
        let n = self.n();
        let z = self.design.predict(&st.beta);
        let w = self.design.predict(&st.gamma);
        let rss_l: f64 = st.log_lambda.iter().zip(&z).map(|(a, z)| (a - z).powi(2)).sum();
        let rss_k: f64 = st.log_k.iter().zip(&w).map(|(b, w)| (b - w).powi(2)).sum();
        let l1 = |v: &[f64]| v.iter().map(|x| x.abs()).sum::<f64>();
        let g2 = rss_l / (2.0 * n) + self.hyper.alpha_beta * l1(&st.beta);
        let g3 = rss_k / (2.0 * n) + self.hyper.alpha_gamma * l1(&st.gamma);
        Ok(g1 + self.hyper.mu * g2 + self.hyper.eta * g3)
    }

    /// Largest projected partial derivative of the smooth part in natural
    /// λ and k coordinates.
    fn max_gradient(&self, st: &State, opts: &SolverOptions) -> f64 {
        let n = self.n();
        let z = self.design.predict(&st.beta);
        let w = self.design.predict(&st.gamma);
        let (la_lo, la_hi) = (opts.lambda_bounds.0.ln(), opts.lambda_bounds.1.ln());
        let (lk_lo, lk_hi) = (opts.shape_bounds.0.ln(), opts.shape_bounds.1.ln());
        let projected = |g: f64, x: f64, lo: f64, hi: f64| {
            if (x <= lo && g > 0.0) || (x >= hi && g < 0.0) {
                0.0
            } else {
                g
            }
        };
        let mut worst = 0.0_f64;
        for (i, s) in self.samples.iter().enumerate() {
            let (a, b) = (st.log_lambda[i], st.log_k[i]);
            let k = b.exp();
            let ga = scale_term(s, a, k, z[i], self.hyper.mu / n).grad;
            worst = worst.max((projected(ga, a, la_lo, la_hi) / a.exp()).abs());
            if opts.fixed_shape.is_none() {
                let gb = shape_term(s, a, b, w[i], self.hyper.eta / n).grad;
                worst = worst.max((projected(gb, b, lk_lo, lk_hi) / k).abs());
            }
        }
        worst
    }
}

/// Fits NEWER to `samples`, whose i-th element pairs with row i of `x`.
pub fn fit_newer(
    samples: &[SubcascadeSample],
    x: &FeatureMatrix,
    hyper: Hyperparams,
    opts: &SolverOptions,
) -> Result<(NewerModel, FitReport)> {
    let (state, report) = run_coordinate_descent(samples, x, hyper, opts)?;
    let kind = if hyper.mu == 0.0 && hyper.eta == 0.0 {
        ModelKind::PlainWeibull
    } else {
        ModelKind::Newer
    };
    let users = fitted_users(samples, &state.log_lambda, &state.log_k)?;
    let model = NewerModel::assemble(kind, x.names().to_vec(), hyper, state.beta, state.gamma, users)?;
    Ok((model, report))
}

pub(crate) fn fitted_users(
    samples: &[SubcascadeSample],
    log_lambda: &[f64],
    log_k: &[f64],
) -> Result<Vec<FittedUser>> {
    samples
        .iter()
        .zip(log_lambda.iter().zip(log_k))
        .map(|(s, (a, b))| {
            let params = WeibullParams::new(a.exp(), b.exp()).map_err(|e| Error::Numerical {
                user: s.user.clone(),
                reason: e.to_string(),
            })?;
            Ok(FittedUser {
                id: s.user.clone(),
                params,
                n_events: s.len(),
            })
        })
        .collect()
}

fn validate_problem(samples: &[SubcascadeSample], x: &FeatureMatrix, hyper: &Hyperparams) -> Result<()> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::Input("no users to fit".into()));
    }
    if samples.len() != x.n_rows() {
        return Err(Error::Input(format!(
            "{} samples but {} feature rows",
            samples.len(),
            x.n_rows()
        )));
    }
    Ok(())
}

fn initial_state(samples: &[SubcascadeSample], r: usize, opts: &SolverOptions) -> Result<State> {
    let (lam_lo, lam_hi) = opts.lambda_bounds;
    let (k_lo, k_hi) = opts.shape_bounds;
    let k_default = opts.fixed_shape.unwrap_or(1.0);
    let state = match &opts.init {
        Some(init) => {
            if init.lambda.len() != samples.len()
                || init.k.len() != samples.len()
                || init.beta.len() != r
                || init.gamma.len() != r
            {
                return Err(Error::Input("initial state does not match the problem dimensions".into()));
            }
            State {
                log_lambda: init.lambda.iter().map(|l| l.clamp(lam_lo, lam_hi).ln()).collect(),
                log_k: match opts.fixed_shape {
                    Some(k) => vec![k.ln(); samples.len()],
                    None => init.k.iter().map(|k| k.clamp(k_lo, k_hi).ln()).collect(),
                },
                beta: init.beta.clone(),
                gamma: init.gamma.clone(),
            }
        }
        None => State {
            log_lambda: samples
                .iter()
                .map(|s| (s.delays.iter().sum::<f64>() / s.m()).clamp(lam_lo, lam_hi).ln())
                .collect(),
            log_k: vec![k_default.ln(); samples.len()],
            beta: vec![0.0; r],
            gamma: vec![0.0; r],
        },
    };
    Ok(state)
}

fn run_coordinate_descent(
    samples: &[SubcascadeSample],
    x: &FeatureMatrix,
    hyper: Hyperparams,
    opts: &SolverOptions,
) -> Result<(State, FitReport)> {
    validate_problem(samples, x, &hyper)?;
    if let Some(k) = opts.fixed_shape {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("fixed shape must be positive, got {k}")));
        }
    }
    let problem = Problem {
        samples,
        design: x.log_design(),
        hyper,
    };
    let mut st = initial_state(samples, x.n_cols(), opts)?;
    let n = problem.n();
    let (la_lo, la_hi) = (opts.lambda_bounds.0.ln(), opts.lambda_bounds.1.ln());
    let (lk_lo, lk_hi) = (opts.shape_bounds.0.ln(), opts.shape_bounds.1.ln());

    let numerical = |st: &State, i: usize| Error::Numerical {
        user: samples[i].user.clone(),
        reason: format!(
            "non-finite objective at lambda={}, k={}",
            st.log_lambda[i].exp(),
            st.log_k[i].exp()
        ),
    };

    let mut previous = problem.objective(&st).map_err(|i| numerical(&st, i))?;
    let mut trace = vec![previous];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        iterations += 1;

        let z = problem.design.predict(&st.beta);
        let pen = hyper.mu / n;
        st.log_lambda = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let k = st.log_k[i].exp();
                let newton = NewtonOptions {
                    grad_tol: opts.newton.grad_tol * (1.0 + s.m()),
                    ..opts.newton
                };
                newton::minimize(
                    |a| scale_term(s, a, k, z[i], pen),
                    st.log_lambda[i],
                    la_lo,
                    la_hi,
                    newton,
                )
            })
            .collect();

        if opts.fixed_shape.is_none() {
            let w = problem.design.predict(&st.gamma);
            let pen = hyper.eta / n;
            st.log_k = samples
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    let a = st.log_lambda[i];
                    let newton = NewtonOptions {
                        grad_tol: opts.newton.grad_tol * (1.0 + s.m()),
                        ..opts.newton
                    };
                    newton::minimize(|b| shape_term(s, a, b, w[i], pen), st.log_k[i], lk_lo, lk_hi, newton)
                })
                .collect();
        }

        st.beta = problem
            .design
            .lasso(&st.log_lambda, hyper.alpha_beta, &st.beta, opts.lasso);
        if opts.fixed_shape.is_none() {
            st.gamma = problem.design.lasso(&st.log_k, hyper.alpha_gamma, &st.gamma, opts.lasso);
        }

        let current = problem.objective(&st).map_err(|i| numerical(&st, i))?;
        trace.push(current);
        let rel_change = (previous - current).abs() / previous.abs().max(1.0);
        previous = current;
        if rel_change < opts.rel_tol && problem.max_gradient(&st, opts) < opts.grad_tol {
            converged = true;
            break;
        }
    }

    let report = FitReport {
        objective: trace,
        converged,
        iterations,
        max_gradient: problem.max_gradient(&st, opts),
    };
    Ok((st, report))
}

/// Evaluates the NEWER objective for `model` on `samples` and `x`, where
/// `model.users()[i]` must be the user of `samples[i]`.
pub fn newer_objective(model: &NewerModel, samples: &[SubcascadeSample], x: &FeatureMatrix) -> Result<f64> {
    validate_problem(samples, x, model.hyperparams())?;
    if model.users().len() != samples.len() {
        return Err(Error::Input(format!(
            "model has {} users, {} samples given",
            model.users().len(),
            samples.len()
        )));
    }
    if model.beta().len() != x.n_cols() {
        return Err(Error::Input(format!(
            "model has {} coefficients, feature matrix has {} columns",
            model.beta().len(),
            x.n_cols()
        )));
    }
    for (u, s) in model.users().iter().zip(samples) {
        if u.id != s.user {
            return Err(Error::Input(format!("model user {} is paired with sample of {}", u.id, s.user)));
        }
    }
    let problem = Problem {
        samples,
        design: x.log_design(),
        hyper: *model.hyperparams(),
    };
    let st = State {
        log_lambda: model.users().iter().map(|u| u.params.scale().ln()).collect(),
        log_k: model.users().iter().map(|u| u.params.shape().ln()).collect(),
        beta: model.beta().to_vec(),
        gamma: model.gamma().to_vec(),
    };
    problem.objective(&st).map_err(|i| Error::Numerical {
        user: samples[i].user.clone(),
        reason: "non-finite objective".into(),
    })
}

/// Closed-form partial derivatives `(∂F/∂λ_i, ∂F/∂k_i)` of the smooth part
/// of the objective, one pair per user.
pub fn smooth_gradient(model: &NewerModel, samples: &[SubcascadeSample], x: &FeatureMatrix) -> Result<Vec<(f64, f64)>> {
    newer_objective(model, samples, x)?;
    let design = x.log_design();
    let n = samples.len() as f64;
    let hyper = model.hyperparams();
    let z = design.predict(model.beta());
    let w = design.predict(model.gamma());
    Ok(model
        .users()
        .iter()
        .zip(samples)
        .enumerate()
        .map(|(i, (u, s))| {
            let (a, k) = (u.params.scale().ln(), u.params.shape());
            let ga = scale_term(s, a, k, z[i], hyper.mu / n).grad;
            let gb = shape_term(s, a, k.ln(), w[i], hyper.eta / n).grad;
            (ga / u.params.scale(), gb / k)
        })
        .collect())
}

/// `λ = exp(ln x · β)`, `k = exp(ln x · γ)`.
pub fn regress_out_of_sample(model: &NewerModel, x: &[f64]) -> Result<WeibullParams> {
    if x.len() != model.beta().len() {
        return Err(Error::Input(format!(
            "feature row has {} entries, model expects {}",
            x.len(),
            model.beta().len()
        )));
    }
    check_feature_row(x)?;
    let dot = |coef: &[f64]| x.iter().zip(coef).map(|(v, c)| v.ln() * c).sum::<f64>();
    WeibullParams::new(dot(model.beta()).exp(), dot(model.gamma()).exp())
}

/// Pairs subcascade samples with feature rows, dropping users with fewer
/// than `min_events` delays. Output order follows the input map order.
pub fn assemble_training<'a, I, F>(samples: I, features: F, min_events: usize) -> Result<(Vec<SubcascadeSample>, Vec<Vec<f64>>)>
where
    I: IntoIterator<Item = &'a SubcascadeSample>,
    F: Fn(&str) -> Option<Vec<f64>>,
{
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for s in samples {
        if s.len() < min_events.max(1) {
            continue;
        }
        let row = features(s.user()).ok_or_else(|| Error::Input(format!("no feature row for user {}", s.user())))?;
        kept.push(s.clone());
        rows.push(row);
    }
    Ok((kept, rows))
}

#[cfg(test)]
mod tests;
