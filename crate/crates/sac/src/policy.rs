//! Tanh-squashed diagonal Gaussian policy.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mat::Mat;
use crate::nn::{Mlp, ParamVars};
use crate::norm::RunningNorm;
use crate::tape::{Tape, Var};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Network emitting `[mean | log_std]` for each action dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianActor {
    pub net: Mlp,
    pub action_dim: usize,
}

/// Recorded reparameterised sample.
#[derive(Debug, Clone, Copy)]
pub struct TapeSample {
    pub action: Var,
    /// `n x 1` log-density of the squashed action.
    pub log_prob: Var,
    pub mean: Var,
    pub log_std: Var,
}

pub fn standard_normal<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}

impl GaussianActor {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], final_scale: f64, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * action_dim);
        let mut net = Mlp::new(&sizes, rng);
        net.scale_output_layer(final_scale);
        Self { net, action_dim }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.in_dim()
    }

    /// Records `a = tanh(mean + std * eps)` and its log-density, including
    /// the change-of-variables term `log(1 - tanh(u)^2)` written as
    /// `2 (ln 2 - u - softplus(-2u))` for stability.
    pub fn sample_on_tape(&self, tape: &mut Tape, params: &ParamVars, obs: Var, eps: &Mat) -> TapeSample {
        let d = self.action_dim;
        let out = self.net.forward(tape, params, obs);
        let mean = tape.cols(out, 0, d);
        let raw_log_std = tape.cols(out, d, 2 * d);
        let log_std = tape.clamp(raw_log_std, LOG_STD_MIN, LOG_STD_MAX);
        let std = tape.exp(log_std);
        let eps_v = tape.constant(eps.clone());
        let noise = tape.mul(std, eps_v);
        let u = tape.add(mean, noise);
        let action = tape.tanh(u);

        let consts = tape.constant(eps.map(|e| -0.5 * e * e - HALF_LN_2PI - 2.0 * std::f64::consts::LN_2));
        let gauss = tape.sub(consts, log_std);
        let neg2u = tape.scale(u, -2.0);
        let sp = tape.softplus(neg2u);
        let inner = tape.add(u, sp);
        let correction = tape.scale(inner, 2.0);
        let per_dim = tape.add(gauss, correction);
        let log_prob = tape.sum_cols(per_dim);
        TapeSample { action, log_prob, mean, log_std }
    }

    /// Sampled actions and their log-densities for a batch of observations.
    pub fn sample(&self, obs: &Mat, eps: &Mat) -> (Mat, Mat) {
        let mut tape = Tape::new();
        let params = self.net.bind(&mut tape, false);
        let x = tape.constant(obs.clone());
        let s = self.sample_on_tape(&mut tape, &params, x, eps);
        (tape.value(s.action).clone(), tape.value(s.log_prob).clone())
    }

    pub fn sample_with_rng<R: Rng + ?Sized>(&self, obs: &Mat, rng: &mut R) -> (Mat, Mat) {
        let eps = standard_normal(obs.rows, self.action_dim, rng);
        self.sample(obs, &eps)
    }

    /// `tanh(mean)`.
    pub fn deterministic(&self, obs: &Mat) -> Mat {
        self.net.predict(obs).cols_range(0, self.action_dim).map(f64::tanh)
    }

    /// Mean and clamped log standard deviation of the pre-squash Gaussian.
    pub fn distribution(&self, obs: &Mat) -> (Mat, Mat) {
        let out = self.net.predict(obs);
        let d = self.action_dim;
        (out.cols_range(0, d), out.cols_range(d, 2 * d).map(|x| x.clamp(LOG_STD_MIN, LOG_STD_MAX)))
    }
}

/// Log-density of the squashed Gaussian at pre-squash point `u`, for a
/// single dimension. Used as a reference in tests and diagnostics.
pub fn squashed_log_density(u: f64, mean: f64, log_std: f64) -> f64 {
    let z = (u - mean) / log_std.exp();
    let gauss = -0.5 * z * z - log_std - HALF_LN_2PI;
    gauss - (1.0 - u.tanh().powi(2)).ln()
}

/// Actor plus the observation statistics it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: GaussianActor,
    pub norm: RunningNorm,
}

impl Policy {
    pub fn obs_dim(&self) -> usize {
        self.actor.obs_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.action_dim
    }

    fn input(&self, obs: &[f64]) -> Mat {
        Mat::row_vector(&self.norm.normalize(obs))
    }

    /// Mean action in `[-1, 1]^n`.
    pub fn act_deterministic(&self, obs: &[f64]) -> Vec<f64> {
        self.actor.deterministic(&self.input(obs)).data
    }

    pub fn act_stochastic<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Vec<f64> {
        self.actor.sample_with_rng(&self.input(obs), rng).0.data
    }
}
