use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::features::FeatureTable;
use crate::fit::NewerModel;
use crate::survival::WeibullParams;

/// Source of per-user Weibull dynamics for prediction.
pub trait DynamicsLookup {
    fn dynamics(&self, user: &str) -> Option<WeibullParams>;
}

impl DynamicsLookup for HashMap<String, WeibullParams> {
    fn dynamics(&self, user: &str) -> Option<WeibullParams> {
        self.get(user).copied()
    }
}

impl DynamicsLookup for BTreeMap<String, WeibullParams> {
    fn dynamics(&self, user: &str) -> Option<WeibullParams> {
        self.get(user).copied()
    }
}

impl<F> DynamicsLookup for F
where
    F: Fn(&str) -> Option<WeibullParams>,
{
    fn dynamics(&self, user: &str) -> Option<WeibullParams> {
        self(user)
    }
}

/// Where a user's dynamics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsSource {
    Fitted,
    Regressed,
    Fallback,
}

/// Model-backed lookup: fitted parameters, then the covariate regression,
/// then the model's population fallback.
#[derive(Debug, Clone, Copy)]
pub struct ModelDynamics<'a> {
    model: &'a NewerModel,
    features: Option<&'a FeatureTable>,
}

impl<'a> ModelDynamics<'a> {
    pub fn new(model: &'a NewerModel, features: Option<&'a FeatureTable>) -> Self {
        Self { model, features }
    }

    pub fn resolve(&self, user: &str) -> (WeibullParams, DynamicsSource) {
        if let Some(u) = self.model.fitted(user) {
            return (u.params, DynamicsSource::Fitted);
        }
        if let Some(row) = self.features.and_then(|f| f.row(user)) {
            if let Ok(p) = self.model.out_of_sample(row) {
                return (p, DynamicsSource::Regressed);
            }
        }
        (self.model.fallback(), DynamicsSource::Fallback)
    }
}

impl DynamicsLookup for ModelDynamics<'_> {
    fn dynamics(&self, user: &str) -> Option<WeibullParams> {
        Some(self.resolve(user).0)
    }
}
