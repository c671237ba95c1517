//! Training runs, including best-of-R repeats.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rampmerge_sac::{save_policy, train, EpisodeLog, Policy, PolicyMeta, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::metrics::{RunLabel, RunSummary};
use crate::rollout::{evaluate, selection_eval_seed, training_env_seed, Actor, TrainingEnv};

pub const POLICY_FILE: &str = "policy.bin";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CONFIG_FILE: &str = "config.json";
pub const SELECTION_FILE: &str = "selection.json";

/// Trains one agent with `cfg` and the given seed.
pub fn train_once(cfg: &RunConfig, seed: u64) -> Result<TrainOutcome> {
    let mut env = TrainingEnv::new(cfg.env, training_env_seed(seed))?;
    let started = Instant::now();
    let approach = cfg.approach();
    let steps = cfg.train.steps;
    let mut next_report = steps / 20;
    let outcome = train(&mut env, &cfg.sac, steps, seed, |ep: &EpisodeLog| {
        if ep.env_step >= next_report {
            next_report += steps / 20;
            info!(
                "{approach} seed {seed}: step {}/{steps}, episode {}, return {:.3}, alpha {:.4}, {:.0} steps/s",
                ep.env_step,
                ep.episode,
                ep.undiscounted_return,
                ep.alpha,
                ep.env_step as f64 / started.elapsed().as_secs_f64().max(1e-9),
            );
        }
    })?;
    info!("{approach} seed {seed}: {} episodes in {:.1} s", outcome.log.len(), started.elapsed().as_secs_f64());
    Ok(outcome)
}

pub fn write_train_log(path: &Path, log: &[EpisodeLog]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    w.write_record(["env_step", "episode", "undiscounted_return", "critic_loss", "actor_loss", "alpha", "entropy"])
        .map_err(|e| HarnessError::format(path, e))?;
    for e in log {
        let row = [
            e.env_step.to_string(),
            e.episode.to_string(),
            e.undiscounted_return.to_string(),
            e.critic_loss.to_string(),
            e.actor_loss.to_string(),
            e.alpha.to_string(),
            e.entropy.to_string(),
        ];
        w.write_record(&row).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Episode returns from a training log, in order.
pub fn read_train_returns(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    let col = r
        .headers()
        .map_err(|e| HarnessError::format(path, e))?
        .iter()
        .position(|h| h == "undiscounted_return")
        .ok_or_else(|| HarnessError::format(path, "no undiscounted_return column"))?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| HarnessError::format(path, e))?;
            rec[col].parse::<f64>().map_err(|e| HarnessError::format(path, e))
        })
        .collect()
}

pub fn policy_meta(cfg: &RunConfig, seed: u64) -> PolicyMeta {
    let bounds = rampmerge_core::action_space(cfg.approach(), &cfg.env.phev, &cfg.env.road);
    PolicyMeta {
        approach: cfg.approach().name().to_string(),
        action_low: bounds.low,
        action_high: bounds.high,
        seed,
        config_hash: cfg.config_hash(),
    }
}

/// Writes the three training artifacts into `dir`.
pub fn write_artifacts(dir: &Path, cfg: &RunConfig, seed: u64, outcome: &TrainOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    save_policy(&dir.join(POLICY_FILE), &outcome.policy, &policy_meta(cfg, seed))?;
    write_train_log(&dir.join(TRAIN_LOG_FILE), &outcome.log)?;
    cfg.write_snapshot(&dir.join(CONFIG_FILE))
}

/// How one repeat fared on the selection episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatScore {
    pub repeat: u32,
    pub seed: u64,
    pub collision_rate: f64,
    pub stop_rate: f64,
    pub avg_combined_cost: f64,
    pub avg_jerk: f64,
}

impl RepeatScore {
    /// Ranking key: combined collision and stop rate (so a clean run always
    /// wins), then combined cost, then jerk. Smaller is better.
    fn key(&self) -> (f64, f64, f64) {
        (self.collision_rate + self.stop_rate, self.avg_combined_cost, self.avg_jerk)
    }
}

/// Index of the best repeat; ties keep the earliest and non-finite scores
/// are never chosen.
pub fn select_best(scores: &[RepeatScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if !s.key().0.is_finite() || !(s.avg_combined_cost.is_finite() && s.avg_jerk.is_finite()) {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => s.key().partial_cmp(&scores[b].key()) == Some(std::cmp::Ordering::Less),
        };
        if better {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub schema_version: u32,
    pub rule: String,
    pub selection_episodes: usize,
    pub selection_seed: u64,
    pub scores: Vec<RepeatScore>,
    pub chosen: u32,
}

pub struct TrainReport {
    pub out: PathBuf,
    pub seed: u64,
    pub episodes: usize,
    pub selection: Option<Selection>,
}

fn score(cfg: &RunConfig, policy: &Policy, repeat: u32, seed: u64) -> Result<RepeatScore> {
    let eval_seed = selection_eval_seed(cfg.train.seed);
    let eps = evaluate(&cfg.env, &Actor::Mean(policy), cfg.train.selection_episodes, eval_seed, cfg.eval.threads)?;
    let label = RunLabel {
        approach: cfg.approach().name().into(),
        policy: format!("repeat_{repeat}"),
        seed: eval_seed,
        config_hash: cfg.config_hash(),
        scenario_hash: cfg.scenario_hash(),
        deterministic: true,
    };
    let s = RunSummary::from_episodes(label, &eps);
    Ok(RepeatScore {
        repeat,
        seed,
        collision_rate: s.collision_rate,
        stop_rate: s.stop_rate,
        avg_combined_cost: s.avg_combined_cost,
        avg_jerk: s.avg_jerk,
    })
}

/// Trains per `cfg.train`. With more than one repeat, repeat `k` uses seed
/// `seed + k` and lands in `out/repeat_k`; the best one is copied to `out`
/// and the ranking is written to `selection.json`.
pub fn run_training(cfg: &RunConfig, out: &Path) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let base = cfg.train.seed;
    if cfg.train.repeats == 1 {
        let outcome = train_once(cfg, base)?;
        write_artifacts(out, cfg, base, &outcome)?;
        return Ok(TrainReport { out: out.to_path_buf(), seed: base, episodes: outcome.log.len(), selection: None });
    }

    let mut scores = Vec::new();
    let mut episodes = Vec::new();
    for k in 0..cfg.train.repeats {
        let seed = base.wrapping_add(u64::from(k));
        let outcome = train_once(cfg, seed)?;
        write_artifacts(&out.join(format!("repeat_{k}")), cfg, seed, &outcome)?;
        let s = score(cfg, &outcome.policy, k, seed)?;
        info!(
            "repeat {k}: collisions {:.4}, stops {:.4}, cost {:.5}, jerk {:.4}",
            s.collision_rate, s.stop_rate, s.avg_combined_cost, s.avg_jerk
        );
        scores.push(s);
        episodes.push(outcome.log.len());
    }
    let best = select_best(&scores).ok_or_else(|| HarnessError::Training("no repeat produced a finite score".into()))?;
    let chosen = scores[best].clone();
    let from = out.join(format!("repeat_{}", chosen.repeat));
    for name in [POLICY_FILE, TRAIN_LOG_FILE] {
        fs::copy(from.join(name), out.join(name)).map_err(|e| HarnessError::io(out.join(name), e))?;
    }
    cfg.write_snapshot(&out.join(CONFIG_FILE))?;
    let selection = Selection {
        schema_version: SCHEMA_VERSION,
        rule: "lowest collision plus stop rate, then lowest combined cost, then lowest jerk".into(),
        selection_episodes: cfg.train.selection_episodes,
        selection_seed: selection_eval_seed(base),
        scores,
        chosen: chosen.repeat,
    };
    let path = out.join(SELECTION_FILE);
    fs::write(&path, serde_json::to_string_pretty(&selection).expect("selection serializes") + "\n")
        .map_err(|e| HarnessError::io(&path, e))?;
    Ok(TrainReport { out: out.to_path_buf(), seed: chosen.seed, episodes: episodes[best], selection: Some(selection) })
}
