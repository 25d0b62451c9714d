//! Per-user Weibull response dynamics fitted by networked Weibull regression
//! (NEWER), and cascade size, process and outbreak prediction built on them.
//!
//! Module map:
//! - [`survival`]: Weibull and empirical survival functions, KS statistic.
//! - [`fit`]: the NEWER estimator and survival baselines.
//! - [`features`]: networks, cascades, subcascade samples and covariates.
//! - [`predict`]: basic and ε-approximate sampling predictors, outbreak search.
//! - [`simulate`]: synthetic networks and cascades with known dynamics.
//! - [`eval`]: metrics, experiment protocols and dominance diagnostics.
//! - [`io`]: file formats.

pub mod error;
pub mod eval;
pub mod features;
pub mod fit;
pub mod io;
pub mod predict;
pub mod simulate;
pub mod survival;

pub use error::{Error, Result};
pub use features::{extract_features, extract_subcascades, filter_cascades, Cascade, Event, FeatureConfig, FeatureTable, Network};
pub use fit::{
    fit_baseline, fit_newer, newer_objective, regress_out_of_sample, user_log_likelihood, BaselineKind, FeatureMatrix,
    FitReport, Hyperparams, InitialState, ModelKind, NewerModel, SolverOptions, SubcascadeSample,
};
pub use survival::{ks_statistic, EmpiricalSurvival, WeibullParams};
pub use predict::{BasicPredictor, Outbreak, PartialCascade, PredictOptions, ProcessCurve, SamplingPredictor};
pub use simulate::{simulate, SimConfig, Simulation};
