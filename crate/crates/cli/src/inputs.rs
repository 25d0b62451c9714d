//! Loading shared inputs with path context in every error.

use std::path::Path;

use anyhow::{Context, Result};
use newer_core::{extract_features, io, Cascade, FeatureConfig, FeatureTable, Network};

pub fn network(path: &Path) -> Result<Network> {
    io::read_network(path).with_context(|| format!("loading network {}", path.display()))
}

pub fn cascades(path: &Path) -> Result<Vec<Cascade>> {
    io::read_cascades(path).with_context(|| format!("loading cascades {}", path.display()))
}

/// A feature CSV when given, otherwise covariates computed on `net` from
/// `fallback` cascades.
pub fn features(path: Option<&Path>, net: Option<&Network>, fallback: &[Cascade]) -> Result<Option<FeatureTable>> {
    match (path, net) {
        (Some(p), _) => Ok(Some(
            io::read_features(p).with_context(|| format!("loading features {}", p.display()))?,
        )),
        (None, Some(net)) => Ok(Some(
            extract_features(net, fallback, &FeatureConfig::default()).context("computing features")?,
        )),
        (None, None) => Ok(None),
    }
}
