//! Episodic training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Sac, SacConfig, UpdateStats};
use crate::error::{Result, SacError};
use crate::norm::RunningNorm;
use crate::policy::Policy;
use crate::replay::{Batch, ReplayBuffer};
use crate::mat::Mat;

/// An episodic task with actions in `[-1, 1]^n`.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn reset(&mut self) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> std::result::Result<EnvStep, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// Genuine end of the task; the bootstrap term is dropped.
    pub terminated: bool,
    /// Cut short (time limit); bootstrapping continues.
    pub truncated: bool,
}

/// One row of the training log. Loss columns average the updates made
/// during the episode and are NaN before learning starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub env_step: u64,
    pub episode: u64,
    pub undiscounted_return: f64,
    pub length: u64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Sac,
    pub policy: Policy,
    pub log: Vec<EpisodeLog>,
    pub env_steps: u64,
}

#[derive(Default)]
struct Accum {
    n: u64,
    sum: [f64; 4],
}

impl Accum {
    fn add(&mut self, s: &UpdateStats) {
        self.n += 1;
        for (acc, v) in self.sum.iter_mut().zip([s.critic_loss, s.actor_loss, s.alpha, s.entropy]) {
            *acc += v;
        }
    }

    fn means(&self) -> [f64; 4] {
        if self.n == 0 {
            return [f64::NAN; 4];
        }
        self.sum.map(|s| s / self.n as f64)
    }
}

pub fn normalized_batch(batch: Batch, norm: &RunningNorm) -> Batch {
    Batch { obs: norm.normalize_mat(&batch.obs), next_obs: norm.normalize_mat(&batch.next_obs), ..batch }
}

/// Trains a fresh agent for `total_steps` environment steps.
///
/// All randomness (initialisation, exploration, minibatches) comes from one
/// generator seeded with `seed`; the environment owns its own.
pub fn train<E: Environment>(
    env: &mut E,
    cfg: &SacConfig,
    total_steps: u64,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeLog),
) -> Result<TrainOutcome> {
    let (obs_dim, action_dim) = (env.obs_dim(), env.action_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = Sac::new(obs_dim, action_dim, cfg.clone(), &mut rng)?;
    let mut norm = RunningNorm::new(obs_dim, cfg.obs_norm);
    let mut buffer = ReplayBuffer::new(obs_dim, action_dim, cfg.buffer_capacity);
    let mut log = Vec::new();

    let mut obs = env.reset();
    check_obs(&obs, obs_dim)?;
    norm.update(&obs);
    let (mut ep_return, mut ep_len, mut acc) = (0.0, 0u64, Accum::default());

    for step in 0..total_steps {
        let action: Vec<f64> = if step < cfg.warmup_steps {
            (0..action_dim).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        } else {
            let input = Mat::row_vector(&norm.normalize(&obs));
            agent.actor.sample_with_rng(&input, &mut rng).0.data
        };
        let out = env.step(&action).map_err(SacError::Env)?;
        check_obs(&out.obs, obs_dim)?;
        if !out.reward.is_finite() {
            return Err(SacError::Env(format!("non-finite reward at step {step}")));
        }
        buffer.push(&obs, &action, out.reward, &out.obs, out.terminated);
        norm.update(&out.obs);
        ep_return += out.reward;
        ep_len += 1;

        if step + 1 >= cfg.warmup_steps && buffer.len() >= cfg.batch_size {
            for _ in 0..cfg.updates_per_env_step {
                let batch = normalized_batch(buffer.sample(cfg.batch_size, &mut rng), &norm);
                let stats = agent.update(&batch, &mut rng);
                if !stats.is_finite() {
                    return Err(SacError::NonFinite { update: agent.updates(), what: "loss" });
                }
                acc.add(&stats);
            }
            if agent.updates() % 1000 == 0 && !agent.is_finite() {
                return Err(SacError::NonFinite { update: agent.updates(), what: "parameters" });
            }
        }

        if out.terminated || out.truncated {
            let [critic_loss, actor_loss, alpha, entropy] = acc.means();
            let entry = EpisodeLog {
                env_step: step + 1,
                episode: log.len() as u64,
                undiscounted_return: ep_return,
                length: ep_len,
                critic_loss,
                actor_loss,
                alpha,
                entropy,
            };
            on_episode(&entry);
            log.push(entry);
            obs = env.reset();
            check_obs(&obs, obs_dim)?;
            norm.update(&obs);
            (ep_return, ep_len, acc) = (0.0, 0, Accum::default());
        } else {
            obs = out.obs;
        }
    }

    if !agent.is_finite() {
        return Err(SacError::NonFinite { update: agent.updates(), what: "parameters" });
    }
    let policy = Policy { actor: agent.actor.clone(), norm };
    Ok(TrainOutcome { agent, policy, log, env_steps: total_steps })
}

fn check_obs(obs: &[f64], dim: usize) -> Result<()> {
    if obs.len() != dim {
        return Err(SacError::Env(format!("observation has {} entries, expected {dim}", obs.len())));
    }
    if obs.iter().any(|x| !x.is_finite()) {
        return Err(SacError::Env("non-finite observation".into()));
    }
    Ok(())
}

/// Trailing moving average with window `w` (shorter at the start).
pub fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    let w = w.max(1);
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for i in 0..xs.len() {
        sum += xs[i];
        if i >= w {
            sum -= xs[i - w];
        }
        out.push(sum / (i + 1).min(w) as f64);
    }
    out
}
