//! Per-episode metrics and their aggregation into a run summary.

use std::fs;
use std::path::Path;

use rampmerge_core::traffic::Terminal;
use rampmerge_core::StepOutcome;
use serde::{Deserialize, Serialize};

use crate::config::SCHEMA_VERSION;
use crate::error::{HarnessError, Result};

/// One evaluation episode. Truncated episodes (time cap reached) have none
/// of `collided`, `stopped`, `succeeded` set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode_id: u64,
    pub saturated: bool,
    pub collided: bool,
    pub stopped: bool,
    pub succeeded: bool,
    pub truncated: bool,
    pub fuel_cost: f64,
    pub electricity_cost: f64,
    pub combined_cost: f64,
    pub mean_abs_jerk: f64,
    pub merged_behind: bool,
    pub episode_steps: u64,
    pub undiscounted_return: f64,
}

/// Folds step outcomes into an [`EpisodeMetrics`].
#[derive(Debug, Clone, Default)]
pub struct EpisodeAccumulator {
    steps: u64,
    saturated: bool,
    fuel: f64,
    electricity: f64,
    abs_jerk: f64,
    ret: f64,
    last: Option<(Option<Terminal>, bool, bool)>,
}

impl EpisodeAccumulator {
    pub fn push(&mut self, out: &StepOutcome) {
        let info = &out.info;
        self.steps += 1;
        self.saturated |= info.saturated;
        self.fuel += info.fuel_cost;
        self.electricity += info.electricity_cost;
        self.abs_jerk += info.jerk.abs();
        self.ret += out.reward.total;
        self.last = Some((info.terminal, info.truncated, info.events.merged_behind));
    }

    pub fn finish(self, episode_id: u64) -> EpisodeMetrics {
        let (terminal, truncated, merged_behind) = self.last.unwrap_or((None, false, false));
        EpisodeMetrics {
            episode_id,
            saturated: self.saturated,
            collided: terminal == Some(Terminal::Collision),
            stopped: terminal == Some(Terminal::Stop),
            succeeded: terminal == Some(Terminal::Success),
            truncated,
            fuel_cost: self.fuel,
            electricity_cost: self.electricity,
            combined_cost: self.fuel + self.electricity,
            mean_abs_jerk: if self.steps > 0 { self.abs_jerk / self.steps as f64 } else { 0.0 },
            merged_behind,
            episode_steps: self.steps,
            undiscounted_return: self.ret,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub approach: String,
    /// Checkpoint path, or `random`.
    pub policy: String,
    pub n_episodes: usize,
    pub saturation_rate: f64,
    pub collision_rate: f64,
    pub stop_rate: f64,
    pub success_rate: f64,
    pub truncation_rate: f64,
    pub avg_fuel_cost: f64,
    pub avg_electricity_cost: f64,
    pub avg_combined_cost: f64,
    pub avg_jerk: f64,
    pub merge_behind_rate: f64,
    pub avg_return: f64,
    pub avg_episode_steps: f64,
    pub seed: u64,
    pub config_hash: String,
    pub scenario_hash: String,
    pub deterministic: bool,
}

/// Identity of the run a summary describes.
#[derive(Debug, Clone)]
pub struct RunLabel {
    pub approach: String,
    pub policy: String,
    pub seed: u64,
    pub config_hash: String,
    pub scenario_hash: String,
    pub deterministic: bool,
}

impl RunSummary {
    /// Every average is divided by the total number of episodes.
    pub fn from_episodes(label: RunLabel, episodes: &[EpisodeMetrics]) -> Self {
        let n = episodes.len();
        let denom = n.max(1) as f64;
        let rate = |f: fn(&EpisodeMetrics) -> bool| episodes.iter().filter(|e| f(e)).count() as f64 / denom;
        let mean = |f: fn(&EpisodeMetrics) -> f64| episodes.iter().map(f).sum::<f64>() / denom;
        Self {
            schema_version: SCHEMA_VERSION,
            approach: label.approach,
            policy: label.policy,
            n_episodes: n,
            saturation_rate: rate(|e| e.saturated),
            collision_rate: rate(|e| e.collided),
            stop_rate: rate(|e| e.stopped),
            success_rate: rate(|e| e.succeeded),
            truncation_rate: rate(|e| e.truncated),
            avg_fuel_cost: mean(|e| e.fuel_cost),
            avg_electricity_cost: mean(|e| e.electricity_cost),
            avg_combined_cost: mean(|e| e.combined_cost),
            avg_jerk: mean(|e| e.mean_abs_jerk),
            merge_behind_rate: rate(|e| e.merged_behind),
            avg_return: mean(|e| e.undiscounted_return),
            avg_episode_steps: mean(|e| e.episode_steps as f64),
            seed: label.seed,
            config_hash: label.config_hash,
            scenario_hash: label.scenario_hash,
            deterministic: label.deterministic,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("summary serializes");
        fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let summary: Self = serde_json::from_str(&text).map_err(|e| HarnessError::format(path, e))?;
        if summary.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::format(path, format!("unsupported schema_version {}", summary.schema_version)));
        }
        Ok(summary)
    }
}

pub fn write_episodes_csv(path: &Path, episodes: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    for e in episodes {
        w.serialize(e).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| HarnessError::format(path, e))).collect()
}
