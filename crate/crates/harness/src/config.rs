//! Run configuration: built-in defaults, overlaid by an optional JSON file,
//! overlaid by `key.path=value` overrides from the command line.

use std::fs;
use std::path::Path;

use rampmerge_core::{Approach, EnvConfig};
use rampmerge_sac::SacConfig;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub steps: u64,
    pub seed: u64,
    /// Independent training runs; the best one is kept.
    pub repeats: u32,
    /// Evaluation episodes used to rank repeats.
    pub selection_episodes: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { steps: 1_000_000, seed: 0, repeats: 1, selection_episodes: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub episodes: usize,
    pub seed: u64,
    /// Sample actions instead of taking the mean action.
    pub stochastic: bool,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { episodes: 500, seed: 1_000_003, stochastic: false, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub env: EnvConfig,
    pub sac: SacConfig,
    pub train: TrainSettings,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            env: EnvConfig::default(),
            sac: SacConfig::default(),
            train: TrainSettings::default(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn approach(&self) -> Approach {
        self.env.episode.approach
    }

    pub fn with_approach(mut self, approach: Approach) -> Self {
        self.env.episode.approach = approach;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.env.validate().map_err(|e| HarnessError::Config(format!("env: {e}")))?;
        self.sac.validate()?;
        if self.train.steps == 0 {
            return Err(HarnessError::Config("train.steps must be > 0".into()));
        }
        if self.train.repeats == 0 {
            return Err(HarnessError::Config("train.repeats must be >= 1".into()));
        }
        if self.eval.episodes == 0 {
            return Err(HarnessError::Config("eval.episodes must be > 0".into()));
        }
        Ok(())
    }

    /// Hash of everything that shapes a trained policy: environment,
    /// learner and training schedule. Evaluation settings are excluded.
    pub fn config_hash(&self) -> String {
        let mut v = self.to_value();
        if let Value::Object(map) = &mut v {
            map.remove("eval");
        }
        short_hash(&v)
    }

    /// Hash of the scenario only (environment without the approach, and
    /// the learner), used to check that runs are comparable.
    pub fn scenario_hash(&self) -> String {
        let mut v = self.to_value();
        if let Value::Object(map) = &mut v {
            map.remove("eval");
            map.remove("train");
            if let Some(Value::Object(episode)) = map.get_mut("env").and_then(|e| e.get_mut("episode")) {
                episode.remove("approach");
            }
        }
        short_hash(&v)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_pretty_json() + "\n").map_err(|e| HarnessError::io(path, e))
    }
}

/// First 16 hex digits of the SHA-256 of the canonical (key-sorted) JSON.
fn short_hash(v: &Value) -> String {
    let canonical = serde_json::to_string(v).expect("value serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    hex::encode(&digest[..8])
}

/// Recursively overlays `overlay` onto `base`. Objects merge key by key;
/// anything else replaces.
pub fn deep_merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Parses `a.b.c=value` into a nested object. The value is read as JSON
/// when possible and as a plain string otherwise.
pub fn parse_override(spec: &str) -> Result<Value> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| HarnessError::Usage(format!("override `{spec}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(HarnessError::Usage(format!("override `{spec}` has an empty key segment")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok(key.rsplit('.').fold(value, |inner, segment| {
        let mut m = Map::new();
        m.insert(segment.to_string(), inner);
        Value::Object(m)
    }))
}

/// Resolves defaults, then the file (if any), then each override in order.
/// Unknown keys and type mismatches are reported with their path.
pub fn resolve(file_text: Option<&str>, overrides: &[String]) -> Result<RunConfig> {
    let mut merged = RunConfig::default().to_value();
    if let Some(text) = file_text {
        if !text.trim().is_empty() {
            let overlay: Value =
                serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("config file is not JSON: {e}")))?;
            if !overlay.is_object() {
                return Err(HarnessError::Config("config file must hold a JSON object".into()));
            }
            deep_merge(&mut merged, overlay);
        }
    }
    for spec in overrides {
        deep_merge(&mut merged, parse_override(spec)?);
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(merged)
        .map_err(|e| HarnessError::Config(format!("at `{}`: {}", e.path(), e.inner())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?),
        None => None,
    };
    resolve(text.as_deref(), overrides)
}
