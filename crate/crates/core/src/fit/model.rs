//! The fitted model and its JSON file format.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_feature_row, Hyperparams};
use crate::error::{Error, Result};
use crate::survival::WeibullParams;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Which estimator produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Newer,
    PlainWeibull,
    Exponential,
    Rayleigh,
    Cox,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Newer => "newer",
            ModelKind::PlainWeibull => "plain_weibull",
            ModelKind::Exponential => "exponential",
            ModelKind::Rayleigh => "rayleigh",
            ModelKind::Cox => "cox",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newer" => Ok(ModelKind::Newer),
            "plain_weibull" | "wbl" => Ok(ModelKind::PlainWeibull),
            "exponential" => Ok(ModelKind::Exponential),
            "rayleigh" => Ok(ModelKind::Rayleigh),
            "cox" | "cox_shared_shape" => Ok(ModelKind::Cox),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// How a model produces dynamics for a user it was not fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum OutOfSampleRule {
    /// Both parameters from the covariate regressions.
    Regress,
    /// Scale from the β regression, shape fixed.
    RegressScale { shape: f64 },
    /// Population-average parameters regardless of covariates.
    Average { lambda: f64, k: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedUser {
    pub id: String,
    pub params: WeibullParams,
    pub n_events: usize,
}

/// Per-user Weibull dynamics plus the covariate regressions. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NewerModel {
    kind: ModelKind,
    feature_names: Vec<String>,
    hyper: Hyperparams,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    users: Vec<FittedUser>,
    out_of_sample: OutOfSampleRule,
    fallback: WeibullParams,
    index: HashMap<String, usize>,
}

impl NewerModel {
    pub(crate) fn assemble(
        kind: ModelKind,
        feature_names: Vec<String>,
        hyper: Hyperparams,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        users: Vec<FittedUser>,
    ) -> Result<Self> {
        let out_of_sample = match kind {
            ModelKind::Newer => OutOfSampleRule::Regress,
            ModelKind::PlainWeibull => {
                let n = users.len().max(1) as f64;
                OutOfSampleRule::Average {
                    lambda: users.iter().map(|u| u.params.scale()).sum::<f64>() / n,
                    k: users.iter().map(|u| u.params.shape()).sum::<f64>() / n,
                }
            }
            ModelKind::Exponential => OutOfSampleRule::RegressScale { shape: 1.0 },
            ModelKind::Rayleigh => OutOfSampleRule::RegressScale { shape: 2.0 },
            ModelKind::Cox => OutOfSampleRule::RegressScale {
                shape: users.first().map(|u| u.params.shape()).unwrap_or(1.0),
            },
        };
        let fallback = median_params(&users)?;
        Self::from_parts(kind, feature_names, hyper, beta, gamma, users, out_of_sample, fallback)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: ModelKind,
        feature_names: Vec<String>,
        hyper: Hyperparams,
        beta: Vec<f64>,
        gamma: Vec<f64>,
        users: Vec<FittedUser>,
        out_of_sample: OutOfSampleRule,
        fallback: WeibullParams,
    ) -> Result<Self> {
        if beta.len() != feature_names.len() || gamma.len() != feature_names.len() {
            return Err(Error::Input(format!(
                "coefficient lengths ({}, {}) do not match {} features",
                beta.len(),
                gamma.len(),
                feature_names.len()
            )));
        }
        let mut index = HashMap::with_capacity(users.len());
        for (i, u) in users.iter().enumerate() {
            if index.insert(u.id.clone(), i).is_some() {
                return Err(Error::Input(format!("user {} appears twice in the model", u.id)));
            }
        }
        Ok(Self {
            kind,
            feature_names,
            hyper,
            beta,
            gamma,
            users,
            out_of_sample,
            fallback,
            index,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn users(&self) -> &[FittedUser] {
        &self.users
    }

    pub fn out_of_sample_rule(&self) -> OutOfSampleRule {
        self.out_of_sample
    }

    /// Population-median parameters, used when a user has neither a fit nor covariates.
    pub fn fallback(&self) -> WeibullParams {
        self.fallback
    }

    pub fn fitted(&self, user: &str) -> Option<&FittedUser> {
        self.index.get(user).map(|&i| &self.users[i])
    }

    /// Dynamics for a user outside the training set, from its covariate row.
    pub fn out_of_sample(&self, x: &[f64]) -> Result<WeibullParams> {
        match self.out_of_sample {
            OutOfSampleRule::Regress => super::regress_out_of_sample(self, x),
            OutOfSampleRule::RegressScale { shape } => {
                let p = super::regress_out_of_sample(self, x)?;
                WeibullParams::new(p.scale(), shape)
            }
            OutOfSampleRule::Average { lambda, k } => {
                if x.len() != self.beta.len() {
                    return Err(Error::Input("feature row length mismatch".into()));
                }
                check_feature_row(x)?;
                WeibullParams::new(lambda, k)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn median_params(users: &[FittedUser]) -> Result<WeibullParams> {
    if users.is_empty() {
        return WeibullParams::new(1.0, 1.0);
    }
    WeibullParams::new(
        median(users.iter().map(|u| u.params.scale()).collect()),
        median(users.iter().map(|u| u.params.shape()).collect()),
    )
}

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    lambda: f64,
    k: f64,
}

#[derive(Serialize, Deserialize)]
struct UserRecord {
    id: String,
    lambda: f64,
    k: f64,
    n_events: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: ModelKind,
    feature_names: Vec<String>,
    hyperparams: Hyperparams,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    out_of_sample: OutOfSampleRule,
    fallback: ParamsRecord,
    users: Vec<UserRecord>,
}

impl From<&NewerModel> for ModelFile {
    fn from(m: &NewerModel) -> Self {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: m.kind,
            feature_names: m.feature_names.clone(),
            hyperparams: m.hyper,
            beta: m.beta.clone(),
            gamma: m.gamma.clone(),
            out_of_sample: m.out_of_sample,
            fallback: ParamsRecord {
                lambda: m.fallback.scale(),
                k: m.fallback.shape(),
            },
            users: m
                .users
                .iter()
                .map(|u| UserRecord {
                    id: u.id.clone(),
                    lambda: u.params.scale(),
                    k: u.params.shape(),
                    n_events: u.n_events,
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for NewerModel {
    type Error = Error;
    fn try_from(f: ModelFile) -> Result<Self> {
        if f.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::Input(format!(
                "unsupported model schema version {}",
                f.schema_version
            )));
        }
        let users = f
            .users
            .into_iter()
            .map(|u| {
                Ok(FittedUser {
                    params: WeibullParams::new(u.lambda, u.k)?,
                    id: u.id,
                    n_events: u.n_events,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        NewerModel::from_parts(
            f.kind,
            f.feature_names,
            f.hyperparams,
            f.beta,
            f.gamma,
            users,
            f.out_of_sample,
            WeibullParams::new(f.fallback.lambda, f.fallback.k)?,
        )
    }
}
