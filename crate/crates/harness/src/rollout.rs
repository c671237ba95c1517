//! Episode execution: seeding, the training adapter, parallel evaluation
//! and per-step traces.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rampmerge_core::traffic::{write_trajectory_header, write_trajectory_rows, Neighbor};
use rampmerge_core::{EnvConfig, MergeEnv, StepOutcome};
use rampmerge_sac::{EnvStep, Environment, Policy};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::metrics::{EpisodeAccumulator, EpisodeMetrics};

/// Stream reserved for the training environment's traffic.
const TRAINING_STREAM: u64 = u64::MAX;
/// Stream reserved for the episodes that rank training repeats.
const SELECTION_STREAM: u64 = u64::MAX - 1;

/// Seed of one evaluation episode, a pure function of `(seed, episode_id)`.
pub fn episode_seed(seed: u64, episode_id: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode_id);
    rng.next_u64()
}

pub fn training_env_seed(seed: u64) -> u64 {
    episode_seed(seed, TRAINING_STREAM)
}

pub fn selection_eval_seed(seed: u64) -> u64 {
    episode_seed(seed, SELECTION_STREAM)
}

/// Adapts [`MergeEnv`] to the learner: normalized observations, actions in
/// `[-1, 1]^n`, and the time cap reported as truncation.
pub struct TrainingEnv {
    env: MergeEnv,
}

impl TrainingEnv {
    pub fn new(cfg: EnvConfig, seed: u64) -> Result<Self> {
        Ok(Self { env: MergeEnv::new(cfg, seed)? })
    }

    pub fn inner(&self) -> &MergeEnv {
        &self.env
    }
}

impl Environment for TrainingEnv {
    fn obs_dim(&self) -> usize {
        self.env.approach().obs_dim()
    }

    fn action_dim(&self) -> usize {
        self.env.approach().action_dim()
    }

    fn reset(&mut self) -> Vec<f64> {
        self.env.reset().normalized
    }

    fn step(&mut self, action: &[f64]) -> std::result::Result<EnvStep, String> {
        let out = self.env.step(action).map_err(|e| e.to_string())?;
        Ok(EnvStep {
            obs: out.obs.normalized,
            reward: out.reward.total,
            terminated: out.info.terminal.is_some(),
            truncated: out.info.truncated,
        })
    }
}

/// What chooses the actions during a rollout.
#[derive(Debug, Clone)]
pub enum Actor<'a> {
    Mean(&'a Policy),
    Sampled(&'a Policy),
    /// Uniform over the action box.
    Random,
    /// The same normalized action every step.
    Constant(Vec<f64>),
}

impl Actor<'_> {
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Actor::Mean(_) | Actor::Constant(_))
    }

    fn act(&self, obs: &[f64], dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Actor::Mean(p) => p.act_deterministic(obs),
            Actor::Sampled(p) => p.act_stochastic(obs, rng),
            Actor::Random => (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
            Actor::Constant(u) => u.clone(),
        }
    }
}

/// Runs one episode to its end, calling `on_step` after every step.
pub fn run_episode(
    cfg: &EnvConfig,
    actor: &Actor,
    seed: u64,
    mut on_step: impl FnMut(&MergeEnv, &StepOutcome) -> Result<()>,
) -> Result<EpisodeAccumulator> {
    let mut env = MergeEnv::new(*cfg, seed)?;
    let mut action_rng = ChaCha8Rng::seed_from_u64(seed);
    action_rng.set_stream(1);
    let dim = env.approach().action_dim();
    let mut obs = env.reset().normalized;
    let mut acc = EpisodeAccumulator::default();
    loop {
        let u = actor.act(&obs, dim, &mut action_rng);
        let out = env.step(&u)?;
        acc.push(&out);
        on_step(&env, &out)?;
        if out.done {
            return Ok(acc);
        }
        obs = out.obs.normalized;
    }
}

/// Evaluates `episodes` episodes with per-episode seeds derived from
/// `seed`. Results are ordered by episode id whatever the thread count;
/// `threads == 0` uses the global pool.
pub fn evaluate(cfg: &EnvConfig, actor: &Actor, episodes: usize, seed: u64, threads: usize) -> Result<Vec<EpisodeMetrics>> {
    let job = || {
        (0..episodes as u64)
            .into_par_iter()
            .map(|id| Ok(run_episode(cfg, actor, episode_seed(seed, id), |_, _| Ok(()))?.finish(id)))
            .collect::<Result<Vec<_>>>()
    };
    if threads == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| HarnessError::Training(format!("thread pool: {e}")))?
            .install(job)
    }
}

/// Column names of a per-step trace.
pub const TRACE_COLUMNS: [&str; 26] = [
    "step", "t", "d", "v", "a", "j", "d_p2", "v_p2", "d_p1", "v_p1", "d_f1", "v_f1", "d_f2", "v_f2", "p_d", "p_eng",
    "p_mg", "p_fbk", "p_b", "soc", "cost", "fuel_cost", "electricity_cost", "saturated", "reward", "lane",
];

fn neighbor_cells(n: &Neighbor) -> [String; 2] {
    [n.d.to_string(), n.v.to_string()]
}

/// Records one episode step by step: positions and speeds of the merger and
/// its four neighbours, acceleration, jerk, every power, SOC and cost.
/// Optionally also writes every vehicle's state per step.
pub fn trace_episode(
    cfg: &EnvConfig,
    actor: &Actor,
    seed: u64,
    out: &Path,
    vehicle_log: Option<&Path>,
) -> Result<EpisodeMetrics> {
    let mut w = csv::Writer::from_path(out).map_err(|e| HarnessError::format(out, e))?;
    w.write_record(TRACE_COLUMNS).map_err(|e| HarnessError::format(out, e))?;
    let mut vehicles = match vehicle_log {
        Some(p) => {
            let mut f = BufWriter::new(File::create(p).map_err(|e| HarnessError::io(p, e))?);
            write_trajectory_header(&mut f).map_err(|e| HarnessError::io(p, e))?;
            Some((p, f))
        }
        None => None,
    };
    let dt = cfg.road.dt;
    let acc = run_episode(cfg, actor, seed, |env, o| {
        let info = &o.info;
        let n = &info.neighbors;
        let s = &info.split;
        let step = env.steps();
        let mut row = vec![
            step.to_string(),
            (step as f64 * dt).to_string(),
            info.merger.d.to_string(),
            info.merger.v.to_string(),
            info.achieved_accel.to_string(),
            info.jerk.to_string(),
        ];
        for nb in [&n.p2, &n.p1, &n.f1, &n.f2] {
            row.extend(neighbor_cells(nb));
        }
        row.extend([s.p_d, s.p_eng, s.p_mg, s.p_fbk, s.p_b, info.soc, info.cost, info.fuel_cost, info.electricity_cost]
            .map(|x| x.to_string()));
        row.push(u8::from(info.saturated).to_string());
        row.push(o.reward.total.to_string());
        row.push(info.merger.lane.as_str().to_string());
        w.write_record(&row).map_err(|e| HarnessError::format(out, e))?;
        if let Some((p, f)) = vehicles.as_mut() {
            write_trajectory_rows(f, step, env.world(), Some(env.merger())).map_err(|e| HarnessError::io(*p, e))?;
        }
        Ok(())
    })?;
    w.flush().map_err(|e| HarnessError::io(out, e))?;
    if let Some((p, mut f)) = vehicles {
        f.flush().map_err(|e| HarnessError::io(p, e))?;
    }
    Ok(acc.finish(0))
}
