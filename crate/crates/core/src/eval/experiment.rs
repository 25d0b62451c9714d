//! Cross-validated experiment protocols comparing NEWER with its baselines.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loglinear::{cascade_features, LogLinearModel};
use super::{process_precision, rmsle, sigma_precision, PredictionRecord, Task, DEFAULT_SIGMA};
use crate::error::{Error, Result};
use crate::features::{extract_subcascades, filter_cascades, Cascade, FeatureTable, Network, DEFAULT_MIN_CASCADE_SIZE};
use crate::fit::{assemble_training, fit_baseline, fit_newer, BaselineKind, Hyperparams, NewerModel, SolverOptions};
use crate::predict::{BasicPredictor, ModelDynamics, Outbreak, PartialCascade, PredictOptions, ProcessCurve};
use crate::simulate::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Newer,
    PlainWeibull,
    Exponential,
    Rayleigh,
    Cox,
    LogLinear,
}

impl ModelChoice {
    pub const ALL: [ModelChoice; 6] = [
        ModelChoice::Newer,
        ModelChoice::PlainWeibull,
        ModelChoice::Exponential,
        ModelChoice::Rayleigh,
        ModelChoice::Cox,
        ModelChoice::LogLinear,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelChoice::Newer => "newer",
            ModelChoice::PlainWeibull => "plain_weibull",
            ModelChoice::Exponential => "exponential",
            ModelChoice::Rayleigh => "rayleigh",
            ModelChoice::Cox => "cox",
            ModelChoice::LogLinear => "log_linear",
        }
    }

    fn is_survival(&self) -> bool {
        *self != ModelChoice::LogLinear
    }
}

impl std::str::FromStr for ModelChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelChoice::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protocol {
    /// Observe the first `s` events of cascades larger than `s`; predict the final size.
    Size { prefixes: Vec<usize> },
    /// Observe `prefix` events; predict when the size reaches `threshold`.
    Outbreak { threshold: f64, prefix: usize },
    /// Observe the first `fraction` of each cascade's duration; predict the
    /// size at `grid_points` times over the rest.
    Process { fractions: Vec<f64>, grid_points: usize },
    /// Hide all subcascades of a random `hidden_fraction` of users from
    /// training; predict final sizes of cascades rooted at hidden users.
    OutOfSample { hidden_fraction: f64, prefix: usize },
}

impl Protocol {
    fn name(&self) -> &'static str {
        match self {
            Protocol::Size { .. } => "size",
            Protocol::Outbreak { .. } => "outbreak",
            Protocol::Process { .. } => "process",
            Protocol::OutOfSample { .. } => "out_of_sample",
        }
    }

    fn sweep(&self) -> (&'static str, Vec<f64>) {
        match self {
            Protocol::Size { prefixes } => ("prefix", prefixes.iter().map(|&s| s as f64).collect()),
            Protocol::Outbreak { prefix, .. } => ("prefix", vec![*prefix as f64]),
            Protocol::Process { fractions, .. } => ("early_fraction", fractions.clone()),
            Protocol::OutOfSample { prefix, .. } => ("prefix", vec![*prefix as f64]),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub folds: usize,
    pub seed: u64,
    pub min_cascade_size: usize,
    /// Users with fewer delays are left out of the likelihood.
    pub min_events: usize,
    pub sigma: f64,
    pub hyper: Hyperparams,
    pub solver: SolverOptions,
    pub predict: PredictOptions,
    pub models: Vec<ModelChoice>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            seed: 1,
            min_cascade_size: DEFAULT_MIN_CASCADE_SIZE,
            min_events: 5,
            sigma: DEFAULT_SIGMA,
            hyper: Hyperparams::default(),
            solver: SolverOptions::default(),
            predict: PredictOptions::default(),
            models: ModelChoice::ALL.to_vec(),
        }
    }
}

/// Inputs shared by every fold.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentData<'a> {
    pub network: &'a Network,
    pub cascades: &'a [Cascade],
    /// Covariates for every network node.
    pub features: &'a FeatureTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: ModelChoice,
    pub sweep: String,
    pub value: f64,
    /// Number of predictions behind the metrics.
    pub n: usize,
    pub rmsle: f64,
    /// σ-precision; for the process protocol, the mean per-cascade process precision.
    pub precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub protocol: String,
    pub folds: usize,
    pub sigma: f64,
    pub cascades: usize,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn row(&self, model: ModelChoice, value: f64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.model == model && r.value == value)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("protocol,model,sweep,value,n,rmsle,precision\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                self.protocol,
                r.model.as_str(),
                r.sweep,
                r.value,
                r.n,
                r.rmsle,
                r.precision
            ));
        }
        out
    }
}

/// Seeded fold assignment stratified by log-size decile: cascades are
/// bucketed by decile of `ln(size)`, shuffled within each bucket and dealt
/// round-robin.
pub fn stratified_folds(sizes: &[usize], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if sizes.len() < folds {
        return Err(Error::Protocol(format!("{} cascades cannot fill {folds} folds", sizes.len())));
    }
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| (sizes[i], i));
    let n = order.len();
    let mut assignment = vec![0; n];
    let mut next = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 20, 0));
    for decile in 0..10 {
        let mut bucket: Vec<usize> = order[decile * n / 10..(decile + 1) * n / 10].to_vec();
        bucket.shuffle(&mut rng);
        for i in bucket {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

type Records = BTreeMap<(ModelChoice, u64), Vec<PredictionRecord>>;
type Precisions = BTreeMap<(ModelChoice, u64), Vec<f64>>;

struct FoldOutput {
    records: Records,
    process: Precisions,
}

fn fit_model(choice: ModelChoice, train: &TrainingSet, cfg: &ExperimentConfig) -> Result<NewerModel> {
    let (s, x, h, o) = (&train.samples, &train.x, cfg.hyper, &cfg.solver);
    match choice {
        ModelChoice::Newer => Ok(fit_newer(s, x, h, o)?.0),
        ModelChoice::PlainWeibull => fit_baseline(BaselineKind::PlainWeibull, s, x, h, o),
        ModelChoice::Exponential => fit_baseline(BaselineKind::Exponential, s, x, h, o),
        ModelChoice::Rayleigh => fit_baseline(BaselineKind::Rayleigh, s, x, h, o),
        ModelChoice::Cox => fit_baseline(BaselineKind::CoxSharedShape, s, x, h, o),
        ModelChoice::LogLinear => unreachable!("log-linear is not a survival model"),
    }
}

struct TrainingSet {
    samples: Vec<crate::fit::SubcascadeSample>,
    x: crate::fit::FeatureMatrix,
}

fn training_set(train: &[&Cascade], hidden: &BTreeSet<String>, data: &ExperimentData, cfg: &ExperimentConfig) -> Result<TrainingSet> {
    let owned: Vec<Cascade> = train.iter().map(|c| (*c).clone()).collect();
    let samples = extract_subcascades(&owned)?;
    let visible = samples.values().filter(|s| !hidden.contains(s.user()));
    let (samples, rows) = assemble_training(visible, |u| data.features.row(u).map(<[f64]>::to_vec), cfg.min_events)?;
    if samples.is_empty() {
        return Err(Error::Protocol(format!(
            "no training user has at least {} events",
            cfg.min_events
        )));
    }
    let x = crate::fit::FeatureMatrix::new(data.features.names().to_vec(), rows)?;
    Ok(TrainingSet { samples, x })
}

fn key(model: ModelChoice, value: f64) -> (ModelChoice, u64) {
    (model, value.to_bits())
}

fn run_fold(
    protocol: &Protocol,
    data: &ExperimentData,
    cfg: &ExperimentConfig,
    train: Vec<&Cascade>,
    test: Vec<&Cascade>,
    hidden: &BTreeSet<String>,
) -> Result<FoldOutput> {
    let v = data.network.node_count();
    let set = training_set(&train, hidden, data, cfg)?;
    let survival: Vec<(ModelChoice, NewerModel)> = cfg
        .models
        .iter()
        .filter(|m| m.is_survival())
        .map(|&m| Ok((m, fit_model(m, &set, cfg)?)))
        .collect::<Result<_>>()?;

    let mut records: Records = BTreeMap::new();
    let mut process: Precisions = BTreeMap::new();
    let (_, sweep) = protocol.sweep();

    for &value in &sweep {
        match protocol {
            Protocol::Size { .. } | Protocol::OutOfSample { .. } => {
                let s = value as usize;
                let eligible = |c: &&&Cascade| {
                    c.size() > s
                        && match protocol {
                            Protocol::OutOfSample { .. } => hidden.contains(&c.events[0].user),
                            _ => true,
                        }
                };
                if cfg.models.contains(&ModelChoice::LogLinear) {
                    let (feats, sizes): (Vec<Vec<f64>>, Vec<f64>) = train
                        .iter()
                        .filter(|c| c.size() > s)
                        .map(|c| {
                            let pc = PartialCascade::observe_prefix(c, s, v)?;
                            Ok((cascade_features(&pc, data.network)?, c.size() as f64))
                        })
                        .collect::<Result<Vec<_>>>()?
                        .into_iter()
                        .unzip();
                    if feats.is_empty() {
                        return Err(Error::Protocol(format!("no training cascade is larger than {s}")));
                    }
                    let ll = LogLinearModel::fit(&feats, &sizes)?;
                    for c in test.iter().filter(eligible) {
                        let pc = PartialCascade::observe_prefix(c, s, v)?;
                        let pred = ll.predict(&cascade_features(&pc, data.network)?).max(s as f64);
                        records
                            .entry(key(ModelChoice::LogLinear, value))
                            .or_default()
                            .push(PredictionRecord::new(&c.id, c.size() as f64, pred, Task::Size));
                    }
                }
                for (m, model) in &survival {
                    let dynamics = ModelDynamics::new(model, Some(data.features));
                    for c in test.iter().filter(eligible) {
                        let pc = PartialCascade::observe_prefix(c, s, v)?;
                        let pred = BasicPredictor::new(&pc, &dynamics, cfg.predict)?.final_size();
                        records
                            .entry(key(*m, value))
                            .or_default()
                            .push(PredictionRecord::new(&c.id, c.size() as f64, pred, Task::Size));
                    }
                }
            }
            Protocol::Outbreak { threshold, prefix } => {
                let need = threshold.ceil() as usize;
                for (m, model) in &survival {
                    let dynamics = ModelDynamics::new(model, Some(data.features));
                    for c in test.iter().filter(|c| c.size() >= need && *prefix < need) {
                        let pc = PartialCascade::observe_prefix(c, *prefix, v)?;
                        let start = c.start_time();
                        let truth = c.events[need - 1].t - start + 1.0;
                        let predicted = match BasicPredictor::new(&pc, &dynamics, cfg.predict)?.outbreak_time(*threshold)? {
                            Outbreak::At(t) => t - start + 1.0,
                            Outbreak::Never => pc.t_limit() - start + cfg.predict.outbreak_horizon + 1.0,
                        };
                        records
                            .entry(key(*m, value))
                            .or_default()
                            .push(PredictionRecord::new(&c.id, truth, predicted, Task::Outbreak));
                    }
                }
            }
            Protocol::Process { grid_points, .. } => {
                let g = (*grid_points).max(2);
                for (m, model) in &survival {
                    let dynamics = ModelDynamics::new(model, Some(data.features));
                    for c in test.iter().filter(|c| c.last_time() > c.start_time()) {
                        let (start, end) = (c.start_time(), c.last_time());
                        let t_obs = start + value * (end - start);
                        let pc = PartialCascade::observe_until(c, t_obs, v)?;
                        let grid: Vec<f64> = (0..g)
                            .map(|i| t_obs + (end - t_obs) * i as f64 / (g - 1) as f64)
                            .collect();
                        let predicted = BasicPredictor::new(&pc, &dynamics, cfg.predict)?.process(&grid)?;
                        let truth = ProcessCurve {
                            points: grid.iter().map(|&t| (t, c.size_at(t) as f64)).collect(),
                        };
                        process
                            .entry(key(*m, value))
                            .or_default()
                            .push(process_precision(&predicted, &truth, cfg.sigma)?);
                        let entry = records.entry(key(*m, value)).or_default();
                        for (p, t) in predicted.points.iter().zip(&truth.points) {
                            entry.push(PredictionRecord::new(&c.id, t.1, p.1, Task::ProcessPoint));
                        }
                    }
                }
            }
        }
    }
    Ok(FoldOutput { records, process })
}

/// Runs `protocol` with stratified k-fold cross-validation and reports
/// RMSLE and σ-precision per model and sweep value.
pub fn run_experiment(protocol: &Protocol, data: &ExperimentData, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    if !(cfg.sigma > 0.0 && cfg.sigma < 1.0) {
        return Err(Error::Config(format!("sigma must lie in (0, 1), got {}", cfg.sigma)));
    }
    let cascades = filter_cascades(data.cascades, cfg.min_cascade_size);
    let sizes: Vec<usize> = cascades.iter().map(Cascade::size).collect();
    let folds = stratified_folds(&sizes, cfg.folds, cfg.seed)?;

    let hidden: BTreeSet<String> = match protocol {
        Protocol::OutOfSample { hidden_fraction, .. } => {
            if !(*hidden_fraction > 0.0 && *hidden_fraction < 1.0) {
                return Err(Error::Config(format!("hidden fraction must lie in (0, 1), got {hidden_fraction}")));
            }
            let mut users: Vec<String> = extract_subcascades(&cascades)?.into_keys().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 21, 0));
            users.shuffle(&mut rng);
            let take = ((*hidden_fraction * users.len() as f64).ceil() as usize).min(users.len());
            users.into_iter().take(take).collect()
        }
        _ => BTreeSet::new(),
    };

    let outputs: Vec<FoldOutput> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let train = cascades.iter().zip(&folds).filter(|(_, &k)| k != f).map(|(c, _)| c).collect();
            let test = cascades.iter().zip(&folds).filter(|(_, &k)| k == f).map(|(c, _)| c).collect();
            run_fold(protocol, data, cfg, train, test, &hidden)
        })
        .collect::<Result<_>>()?;

    let mut records: Records = BTreeMap::new();
    let mut process: Precisions = BTreeMap::new();
    for out in outputs {
        for (k, v) in out.records {
            records.entry(k).or_default().extend(v);
        }
        for (k, v) in out.process {
            process.entry(k).or_default().extend(v);
        }
    }

    let (sweep_name, sweep) = protocol.sweep();
    let mut rows = Vec::new();
    for &model in &cfg.models {
        for &value in &sweep {
            let Some(recs) = records.get(&key(model, value)) else {
                continue;
            };
            let precision = match process.get(&key(model, value)) {
                Some(p) => p.iter().sum::<f64>() / p.len() as f64,
                None => sigma_precision(recs, cfg.sigma)?,
            };
            rows.push(ReportRow {
                model,
                sweep: sweep_name.to_string(),
                value,
                n: recs.len(),
                rmsle: rmsle(recs)?,
                precision,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Protocol(format!("protocol {} produced no predictions", protocol.name())));
    }
    Ok(ExperimentReport {
        protocol: protocol.name().to_string(),
        folds: cfg.folds,
        sigma: cfg.sigma,
        cascades: cascades.len(),
        rows,
    })
}
