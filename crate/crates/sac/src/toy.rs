//! Small environments with known solutions, used to check the learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::train::{EnvStep, Environment};

/// 1-D point mass pushed toward the origin. Reward `-(x^2 + c a^2)`.
#[derive(Debug, Clone)]
pub struct PointMass {
    pub x: f64,
    pub v: f64,
    pub horizon: u32,
    pub dt: f64,
    pub gain: f64,
    pub action_cost: f64,
    t: u32,
    rng: ChaCha8Rng,
}

impl PointMass {
    pub fn new(seed: u64) -> Self {
        Self {
            x: 0.0,
            v: 0.0,
            horizon: 50,
            dt: 0.1,
            gain: 4.0,
            action_cost: 0.01,
            t: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Environment for PointMass {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.x = self.rng.gen_range(-1.0..1.0);
        self.v = 0.0;
        self.t = 0;
        vec![self.x, self.v]
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, String> {
        let a = action[0].clamp(-1.0, 1.0);
        self.v += self.gain * a * self.dt;
        self.x = (self.x + self.v * self.dt).clamp(-3.0, 3.0);
        self.t += 1;
        Ok(EnvStep {
            obs: vec![self.x, self.v],
            reward: -(self.x * self.x + self.action_cost * a * a),
            terminated: false,
            truncated: self.t >= self.horizon,
        })
    }
}

/// One-step continuous bandit with reward `-(a - target)^2`.
#[derive(Debug, Clone)]
pub struct Bandit {
    pub target: f64,
}

impl Environment for Bandit {
    fn obs_dim(&self) -> usize {
        1
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        vec![1.0]
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, String> {
        let d = action[0] - self.target;
        Ok(EnvStep { obs: vec![1.0], reward: -d * d, terminated: true, truncated: false })
    }
}

/// Deterministic two-state chain: the state alternates every step and
/// state `s` pays `bonus[s] - (a - target[s])^2`. Episodes are cut by a
/// time limit, never terminated.
#[derive(Debug, Clone)]
pub struct TwoStateMdp {
    pub bonus: [f64; 2],
    pub target: [f64; 2],
    pub horizon: u32,
    state: usize,
    t: u32,
}

impl TwoStateMdp {
    pub fn new(bonus: [f64; 2], target: [f64; 2], horizon: u32) -> Self {
        Self { bonus, target, horizon, state: 0, t: 0 }
    }

    pub fn one_hot(state: usize) -> Vec<f64> {
        let mut o = vec![0.0, 0.0];
        o[state] = 1.0;
        o
    }

    pub fn reward(&self, state: usize, a: f64) -> f64 {
        self.bonus[state] - (a - self.target[state]).powi(2)
    }
}

impl Environment for TwoStateMdp {
    fn obs_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn reset(&mut self) -> Vec<f64> {
        self.state = 0;
        self.t = 0;
        Self::one_hot(0)
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, String> {
        let r = self.reward(self.state, action[0]);
        self.state = 1 - self.state;
        self.t += 1;
        Ok(EnvStep {
            obs: Self::one_hot(self.state),
            reward: r,
            terminated: false,
            truncated: self.t >= self.horizon,
        })
    }
}
