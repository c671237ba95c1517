//! Uniform experience replay over flat storage.

use rand::Rng;

use crate::mat::Mat;

#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Mat,
    pub actions: Mat,
    /// `n x 1`
    pub rewards: Mat,
    pub next_obs: Mat,
    /// `n x 1`, 1.0 for genuine terminations.
    pub dones: Mat,
}

/// Ring buffer; storage grows on demand up to `capacity`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    obs_dim: usize,
    action_dim: usize,
    capacity: usize,
    len: usize,
    next: usize,
    obs: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_obs: Vec<f64>,
    dones: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(obs_dim: usize, action_dim: usize, capacity: usize) -> Self {
        assert!(capacity > 0);
        Self {
            obs_dim,
            action_dim,
            capacity,
            len: 0,
            next: 0,
            obs: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_obs: Vec::new(),
            dones: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, obs: &[f64], action: &[f64], reward: f64, next_obs: &[f64], done: bool) {
        assert_eq!(obs.len(), self.obs_dim);
        assert_eq!(next_obs.len(), self.obs_dim);
        assert_eq!(action.len(), self.action_dim);
        let done = if done { 1.0 } else { 0.0 };
        if self.len < self.capacity {
            self.obs.extend_from_slice(obs);
            self.actions.extend_from_slice(action);
            self.rewards.push(reward);
            self.next_obs.extend_from_slice(next_obs);
            self.dones.push(done);
            self.len += 1;
        } else {
            let i = self.next;
            let (od, ad) = (self.obs_dim, self.action_dim);
            self.obs[i * od..(i + 1) * od].copy_from_slice(obs);
            self.actions[i * ad..(i + 1) * ad].copy_from_slice(action);
            self.rewards[i] = reward;
            self.next_obs[i * od..(i + 1) * od].copy_from_slice(next_obs);
            self.dones[i] = done;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// Indices drawn uniformly with replacement.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        assert!(self.len > 0, "sampling from an empty buffer");
        (0..n).map(|_| rng.gen_range(0..self.len)).collect()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let (od, ad) = (self.obs_dim, self.action_dim);
        let n = idx.len();
        let mut obs = Vec::with_capacity(n * od);
        let mut actions = Vec::with_capacity(n * ad);
        let mut next_obs = Vec::with_capacity(n * od);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for &i in idx {
            obs.extend_from_slice(&self.obs[i * od..(i + 1) * od]);
            actions.extend_from_slice(&self.actions[i * ad..(i + 1) * ad]);
            next_obs.extend_from_slice(&self.next_obs[i * od..(i + 1) * od]);
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Batch {
            obs: Mat::from_vec(n, od, obs),
            actions: Mat::from_vec(n, ad, actions),
            rewards: Mat::from_vec(n, 1, rewards),
            next_obs: Mat::from_vec(n, od, next_obs),
            dones: Mat::from_vec(n, 1, dones),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Batch {
        self.gather(&self.sample_indices(n, rng))
    }
}
