//! TOML experiment configuration with schema validation. Unknown or missing
//! keys are rejected with an error naming the offending key.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, SystemKind};
use crate::kedmd::{CenterStrategy, SigmaPolicy, StateScaling};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: SystemKind,
    #[serde(default)]
    tau_d: Option<f64>,
    #[serde(default)]
    horizon: Option<f64>,
    #[serde(default)]
    delta: Option<f64>,
    #[serde(default)]
    step: Option<f64>,
    m_list: Vec<usize>,
    p_list: Vec<usize>,
    rho_list: Vec<f64>,
    n_train: Vec<usize>,
    #[serde(default)]
    n_test: Option<usize>,
    #[serde(default)]
    ic_bounds: Option<Vec<[f64; 2]>>,
    data_seed: u64,
    #[serde(default)]
    test_seed: Option<u64>,
    #[serde(default)]
    center_seed: Option<u64>,
    #[serde(default)]
    min_neighbors: Option<usize>,
    #[serde(default)]
    strategy: Option<String>,
    #[serde(default)]
    sigma: Option<SigmaPolicy>,
    #[serde(default)]
    scaling: Option<StateScaling>,
    #[serde(default)]
    failure_threshold: Option<f64>,
    #[serde(default)]
    match_fill: Option<bool>,
    out_dir: PathBuf,
}

/// Parses and validates an experiment config from TOML text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let mut cfg = ExperimentConfig::new(raw.system, raw.out_dir);
    if let Some(tau) = raw.tau_d {
        cfg.delay = tau;
    }
    if let Some(h) = raw.horizon {
        cfg.horizon = h;
    }
    if let Some(d) = raw.delta {
        cfg.delta = d;
    }
    cfg.step = raw.step.unwrap_or(cfg.delta / 10.0);
    cfg.m_list = raw.m_list;
    cfg.p_list = raw.p_list;
    cfg.rho_list = raw.rho_list;
    cfg.n_train = raw.n_train;
    if let Some(n) = raw.n_test {
        cfg.n_test = n;
    }
    if let Some(b) = raw.ic_bounds {
        cfg.ic_bounds = b.into_iter().map(|[lo, hi]| (lo, hi)).collect();
    }
    cfg.data_seed = raw.data_seed;
    cfg.test_seed = raw.test_seed.unwrap_or(cfg.data_seed.wrapping_add(1_000_003));
    cfg.center_seed = raw.center_seed.unwrap_or(cfg.data_seed);
    if let Some(d) = raw.min_neighbors {
        cfg.min_neighbors = d;
    }
    if let Some(s) = raw.strategy {
        cfg.strategy = s.parse::<CenterStrategy>()?;
    }
    if let Some(p) = raw.sigma {
        cfg.sigma_policy = p;
    }
    if let Some(s) = raw.scaling {
        cfg.scaling = s;
    }
    if let Some(ft) = raw.failure_threshold {
        cfg.failure_threshold = ft;
    }
    if let Some(mf) = raw.match_fill {
        cfg.match_fill = mf;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads an experiment config from a TOML file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config '{}': {e}", path.display())))?;
    parse_config(&text)
}
