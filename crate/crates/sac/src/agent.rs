//! Soft actor-critic: double critics with target copies, a squashed
//! Gaussian actor and a learned entropy temperature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SacError};
use crate::mat::Mat;
use crate::nn::{Adam, AdamConfig, Mlp};
use crate::policy::{standard_normal, GaussianActor};
use crate::replay::Batch;
use crate::tape::Tape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Uniform-random steps collected before learning starts.
    pub warmup_steps: u64,
    pub updates_per_env_step: usize,
    pub hidden: Vec<usize>,
    pub init_alpha: f64,
    pub auto_alpha: bool,
    /// Defaults to `-action_dim`.
    pub target_entropy: Option<f64>,
    pub actor_final_scale: f64,
    pub obs_norm: bool,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            warmup_steps: 10_000,
            updates_per_env_step: 1,
            hidden: vec![64, 64],
            init_alpha: 1.0,
            auto_alpha: true,
            target_entropy: None,
            actor_final_scale: 0.01,
            obs_norm: true,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(SacError::InvalidConfig(what.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.tau >= 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in [0, 1]");
        }
        for (name, lr) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("lr_alpha", self.lr_alpha)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(SacError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("need 0 < batch_size <= buffer_capacity");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden layer sizes must be non-empty and positive");
        }
        if !(self.init_alpha > 0.0) {
            return bad("init_alpha must be > 0");
        }
        Ok(())
    }

    fn adam(&self, lr: f64) -> AdamConfig {
        AdamConfig { lr, beta1: self.adam_beta1, beta2: self.adam_beta2, eps: self.adam_eps }
    }
}

pub fn critic_net<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Mlp {
    let mut sizes = vec![obs_dim + action_dim];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    Mlp::new(&sizes, rng)
}

/// Soft Bellman targets `r + gamma (1 - done) (min_i Qbar_i(s', a') - alpha log pi(a'|s'))`
/// with `a'` drawn from the current actor using noise `eps`.
pub fn bellman_targets(
    actor: &GaussianActor,
    q1_target: &Mlp,
    q2_target: &Mlp,
    alpha: f64,
    gamma: f64,
    batch: &Batch,
    eps: &Mat,
) -> Mat {
    let (next_a, next_logp) = actor.sample(&batch.next_obs, eps);
    let input = batch.next_obs.hcat(&next_a);
    let q1 = q1_target.predict(&input);
    let q2 = q2_target.predict(&input);
    let data = (0..batch.rewards.rows)
        .map(|i| {
            let soft = q1.data[i].min(q2.data[i]) - alpha * next_logp.data[i];
            batch.rewards.data[i] + gamma * (1.0 - batch.dones.data[i]) * soft
        })
        .collect();
    Mat::from_vec(batch.rewards.rows, 1, data)
}

#[derive(Debug, Clone)]
pub struct CriticLoss {
    pub loss_q1: f64,
    pub loss_q2: f64,
    pub grads_q1: Vec<Mat>,
    pub grads_q2: Vec<Mat>,
    pub mean_q: f64,
}

impl CriticLoss {
    pub fn total(&self) -> f64 {
        self.loss_q1 + self.loss_q2
    }
}

/// Mean squared Bellman residual of each critic against fixed `targets`.
pub fn critic_loss(q1: &Mlp, q2: &Mlp, obs: &Mat, actions: &Mat, targets: &Mat) -> CriticLoss {
    let mut tape = Tape::new();
    let p1 = q1.bind(&mut tape, true);
    let p2 = q2.bind(&mut tape, true);
    let input = tape.constant(obs.hcat(actions));
    let y = tape.constant(targets.clone());
    let out1 = q1.forward(&mut tape, &p1, input);
    let out2 = q2.forward(&mut tape, &p2, input);
    let r1 = tape.sub(out1, y);
    let r2 = tape.sub(out2, y);
    let s1 = tape.square(r1);
    let s2 = tape.square(r2);
    let l1 = tape.mean(s1);
    let l2 = tape.mean(s2);
    let total = tape.add(l1, l2);
    let mut grads = tape.backward(total);
    let q1_vals = tape.value(out1);
    CriticLoss {
        loss_q1: tape.value(l1).item(),
        loss_q2: tape.value(l2).item(),
        grads_q1: q1.collect_grads(&mut grads, &p1),
        grads_q2: q2.collect_grads(&mut grads, &p2),
        mean_q: q1_vals.data.iter().sum::<f64>() / q1_vals.len() as f64,
    }
}

#[derive(Debug, Clone)]
pub struct ActorLoss {
    pub loss: f64,
    pub grads: Vec<Mat>,
    pub mean_log_prob: f64,
}

/// `mean(alpha log pi(a|s) - min_i Q_i(s, a))` with reparameterised `a`.
pub fn actor_loss(actor: &GaussianActor, q1: &Mlp, q2: &Mlp, obs: &Mat, eps: &Mat, alpha: f64) -> ActorLoss {
    let mut tape = Tape::new();
    let pa = actor.net.bind(&mut tape, true);
    let p1 = q1.bind(&mut tape, false);
    let p2 = q2.bind(&mut tape, false);
    let s = tape.constant(obs.clone());
    let sample = actor.sample_on_tape(&mut tape, &pa, s, eps);
    let input = tape.hcat(s, sample.action);
    let v1 = q1.forward(&mut tape, &p1, input);
    let v2 = q2.forward(&mut tape, &p2, input);
    let q = tape.min(v1, v2);
    let weighted = tape.scale(sample.log_prob, alpha);
    let diff = tape.sub(weighted, q);
    let loss = tape.mean(diff);
    let mut grads = tape.backward(loss);
    let lp = tape.value(sample.log_prob);
    ActorLoss {
        loss: tape.value(loss).item(),
        grads: actor.net.collect_grads(&mut grads, &pa),
        mean_log_prob: lp.data.iter().sum::<f64>() / lp.len() as f64,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub mean_q: f64,
}

impl UpdateStats {
    pub fn is_finite(&self) -> bool {
        [self.critic_loss, self.actor_loss, self.alpha, self.entropy, self.mean_q].iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub cfg: SacConfig,
    pub actor: GaussianActor,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub log_alpha: f64,
    pub target_entropy: f64,
    actor_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
    alpha_opt: Adam,
    updates: u64,
}

impl Sac {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, cfg: SacConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let actor = GaussianActor::new(obs_dim, action_dim, &cfg.hidden, cfg.actor_final_scale, rng);
        let q1 = critic_net(obs_dim, action_dim, &cfg.hidden, rng);
        let q2 = critic_net(obs_dim, action_dim, &cfg.hidden, rng);
        Ok(Self {
            actor_opt: Adam::for_mlp(cfg.adam(cfg.lr_actor), &actor.net),
            q1_opt: Adam::for_mlp(cfg.adam(cfg.lr_critic), &q1),
            q2_opt: Adam::for_mlp(cfg.adam(cfg.lr_critic), &q2),
            alpha_opt: Adam::new(cfg.adam(cfg.lr_alpha), &[1]),
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            log_alpha: cfg.init_alpha.ln(),
            target_entropy: cfg.target_entropy.unwrap_or(-(action_dim as f64)),
            actor,
            q1,
            q2,
            updates: 0,
            cfg,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn action_dim(&self) -> usize {
        self.actor.action_dim
    }

    /// Q-values of both online critics.
    pub fn q_values(&self, obs: &Mat, actions: &Mat) -> (Mat, Mat) {
        let input = obs.hcat(actions);
        (self.q1.predict(&input), self.q2.predict(&input))
    }

    pub fn is_finite(&self) -> bool {
        self.actor.net.is_finite()
            && self.q1.is_finite()
            && self.q2.is_finite()
            && self.q1_target.is_finite()
            && self.q2_target.is_finite()
            && self.log_alpha.is_finite()
    }

    /// One critic step, one actor step, one temperature step, then the
    /// Polyak target update. `batch` observations must already be normalised.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> UpdateStats {
        let n = batch.obs.rows;
        let d = self.action_dim();
        let alpha = self.alpha();

        let eps_next = standard_normal(n, d, rng);
        let targets =
            bellman_targets(&self.actor, &self.q1_target, &self.q2_target, alpha, self.cfg.gamma, batch, &eps_next);
        let critic = critic_loss(&self.q1, &self.q2, &batch.obs, &batch.actions, &targets);
        self.q1_opt.step_mlp(&mut self.q1, &critic.grads_q1);
        self.q2_opt.step_mlp(&mut self.q2, &critic.grads_q2);

        let eps = standard_normal(n, d, rng);
        let actor = actor_loss(&self.actor, &self.q1, &self.q2, &batch.obs, &eps, alpha);
        self.actor_opt.step_mlp(&mut self.actor.net, &actor.grads);

        if self.cfg.auto_alpha {
            // d/dlog_alpha of -log_alpha * (log_pi + target_entropy)
            let grad = -(actor.mean_log_prob + self.target_entropy);
            let mut la = [self.log_alpha];
            self.alpha_opt.step(&mut [&mut la], &[&[grad]]);
            self.log_alpha = la[0];
        }

        self.q1_target.polyak_from(&self.q1, self.cfg.tau);
        self.q2_target.polyak_from(&self.q2, self.cfg.tau);
        self.updates += 1;

        UpdateStats {
            critic_loss: 0.5 * critic.total(),
            actor_loss: actor.loss,
            alpha,
            entropy: -actor.mean_log_prob,
            mean_q: critic.mean_q,
        }
    }
}
