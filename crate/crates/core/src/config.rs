//! Plain-text run configuration: one `key = value` pair per line, `#` starts
//! a comment. Every key is optional; parsed values overlay an existing
//! [`ExperimentConfig`], and the caller applies command-line flags on top.

use crate::experiment::{ExperimentConfig, Scheme};
use crate::optimizer::InitMode;
use crate::rate::DenomMode;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value', got '{text}'")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: value for '{key}' must be {expected}, got '{value}'")]
    BadValue { line: usize, key: &'static str, expected: &'static str, value: String },
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Values found in a config file. `None` means the key was absent.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub num_aps: Option<usize>,
    pub num_users: Option<usize>,
    pub trials: Option<usize>,
    pub master_seed: Option<u64>,
    pub schemes: Option<Vec<Scheme>>,
    pub tx_power_dbm: Option<f64>,
    pub noise_dbm: Option<f64>,
    pub ref_gain_db: Option<f64>,
    pub pathloss_exp: Option<f64>,
    pub rician_k: Option<f64>,
    pub wavelength: Option<f64>,
    pub directivity: Option<u32>,
    pub smoothness: Option<f64>,
    pub area_side: Option<f64>,
    pub ap_height: Option<f64>,
    pub user_height: Option<f64>,
    pub xi: Option<f64>,
    pub max_outer: Option<usize>,
    pub inner_tol: Option<f64>,
    pub max_inner: Option<usize>,
    pub init_mode: Option<InitMode>,
    pub denom_mode: Option<DenomMode>,
    pub isotropic_hemisphere: Option<bool>,
    pub output_path: Option<PathBuf>,
}

fn parse_as<T: FromStr>(
    line: usize,
    key: &'static str,
    value: &str,
    expected: &'static str,
) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { line, key, expected, value: value.into() })
}

fn parse_schemes(line: usize, value: &str) -> Result<Vec<Scheme>, ConfigError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<Scheme>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| ConfigError::BadValue {
            line,
            key: "schemes",
            expected: "a comma-separated subset of fixed, isotropic, aligned, optimized",
            value: value.into(),
        })
}

fn parse_init(line: usize, value: &str) -> Result<InitMode, ConfigError> {
    match value {
        "aligned" => Ok(InitMode::Aligned),
        "fixed" => Ok(InitMode::Fixed),
        "random" => Ok(InitMode::Random { seed: 0 }),
        _ => Err(ConfigError::BadValue {
            line,
            key: "init_mode",
            expected: "one of aligned, fixed, random",
            value: value.into(),
        }),
    }
}

pub fn parse_config_str(text: &str) -> Result<FileConfig, ConfigError> {
    let mut cfg = FileConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let Some((key, value)) = stripped.split_once('=') else {
            return Err(ConfigError::Malformed { line, text: stripped.into() });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "num_aps" => cfg.num_aps = Some(parse_as(line, "num_aps", value, "a positive integer")?),
            "num_users" => cfg.num_users = Some(parse_as(line, "num_users", value, "a positive integer")?),
            "trials" => cfg.trials = Some(parse_as(line, "trials", value, "a positive integer")?),
            "master_seed" => cfg.master_seed = Some(parse_as(line, "master_seed", value, "an unsigned integer")?),
            "schemes" => cfg.schemes = Some(parse_schemes(line, value)?),
            "tx_power_dbm" => cfg.tx_power_dbm = Some(parse_as(line, "tx_power_dbm", value, "a number")?),
            "noise_dbm" => cfg.noise_dbm = Some(parse_as(line, "noise_dbm", value, "a number")?),
            "ref_gain_db" => cfg.ref_gain_db = Some(parse_as(line, "ref_gain_db", value, "a number")?),
            "pathloss_exp" => cfg.pathloss_exp = Some(parse_as(line, "pathloss_exp", value, "a number")?),
            "rician_k" => cfg.rician_k = Some(parse_as(line, "rician_k", value, "a number")?),
            "wavelength" => cfg.wavelength = Some(parse_as(line, "wavelength", value, "a number")?),
            "directivity" => cfg.directivity = Some(parse_as(line, "directivity", value, "a non-negative integer")?),
            "smoothness" => cfg.smoothness = Some(parse_as(line, "smoothness", value, "a number")?),
            "area_side" => cfg.area_side = Some(parse_as(line, "area_side", value, "a number")?),
            "ap_height" => cfg.ap_height = Some(parse_as(line, "ap_height", value, "a number")?),
            "user_height" => cfg.user_height = Some(parse_as(line, "user_height", value, "a number")?),
            "xi" => cfg.xi = Some(parse_as(line, "xi", value, "a number")?),
            "max_outer" => cfg.max_outer = Some(parse_as(line, "max_outer", value, "a positive integer")?),
            "inner_tol" => cfg.inner_tol = Some(parse_as(line, "inner_tol", value, "a number")?),
            "max_inner" => cfg.max_inner = Some(parse_as(line, "max_inner", value, "a positive integer")?),
            "init_mode" => cfg.init_mode = Some(parse_init(line, value)?),
            "denom_mode" => cfg.denom_mode = Some(parse_as(
                line,
                "denom_mode",
                value,
                "one of as_printed, per_interferer",
            )?),
            "isotropic_hemisphere" => {
                cfg.isotropic_hemisphere =
                    Some(parse_as(line, "isotropic_hemisphere", value, "true or false")?)
            }
            "output_path" => cfg.output_path = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    Ok(cfg)
}

pub fn parse_config_file(path: &Path) -> Result<FileConfig, ConfigError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

impl FileConfig {
    /// Overlays the file's values on `cfg`, leaving absent keys untouched.
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(v) = self.num_aps {
            cfg.params.num_aps = v;
        }
        if let Some(v) = self.num_users {
            cfg.params.num_users = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.master_seed {
            cfg.master_seed = v;
        }
        if let Some(v) = &self.schemes {
            cfg.schemes = v.clone();
        }
        if let Some(v) = self.tx_power_dbm {
            cfg.params.tx_power_dbm = v;
        }
        if let Some(v) = self.noise_dbm {
            cfg.params.noise_dbm = v;
        }
        if let Some(v) = self.ref_gain_db {
            cfg.params.ref_gain_db = v;
        }
        if let Some(v) = self.pathloss_exp {
            cfg.params.pathloss_exp = v;
        }
        if let Some(v) = self.rician_k {
            cfg.params.rician_k = v;
        }
        if let Some(v) = self.wavelength {
            cfg.params.wavelength = v;
        }
        if let Some(v) = self.directivity {
            cfg.params.directivity = v;
        }
        if let Some(v) = self.smoothness {
            cfg.params.smoothness = v;
        }
        if let Some(v) = self.area_side {
            cfg.params.area_side = v;
        }
        if let Some(v) = self.ap_height {
            cfg.params.ap_height = v;
        }
        if let Some(v) = self.user_height {
            cfg.params.user_height = v;
        }
        if let Some(v) = self.xi {
            cfg.opt.xi = v;
        }
        if let Some(v) = self.max_outer {
            cfg.opt.max_outer = v;
        }
        if let Some(v) = self.inner_tol {
            cfg.opt.inner_tol = v;
        }
        if let Some(v) = self.max_inner {
            cfg.opt.max_inner = v;
        }
        if let Some(v) = self.init_mode {
            cfg.opt.init_mode = v;
        }
        if let Some(v) = self.denom_mode {
            cfg.denom_mode = v;
        }
        if let Some(v) = self.isotropic_hemisphere {
            cfg.isotropic_hemisphere = v;
        }
        if let Some(v) = &self.output_path {
            cfg.output_path = v.clone();
        }
    }
}
