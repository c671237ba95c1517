//! Fully connected ReLU networks and the Adam optimizer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mat::{affine, Mat};
use crate::tape::{Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `in x out`
    pub w: Mat,
    /// `1 x out`
    pub b: Mat,
}

/// ReLU hidden layers, linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Tape handles for one network's parameters, in `[w0, b0, w1, b1, ...]` order.
#[derive(Debug, Clone)]
pub struct ParamVars(pub Vec<Var>);

impl Mlp {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|pair| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |n: usize| (0..n).map(|_| rng.gen_range(-bound..bound)).collect::<Vec<_>>();
                let w = Mat::from_vec(fan_in, fan_out, draw(fan_in * fan_out));
                let b = Mat::from_vec(1, fan_out, draw(fan_out));
                Linear { w, b }
            })
            .collect();
        Self { layers }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.in_dim()];
        sizes.extend(self.layers.iter().map(|l| l.w.cols));
        sizes
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].w.rows
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.cols
    }

    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.layers.last_mut().expect("non-empty");
        last.w = last.w.map(|x| x * factor);
        last.b = last.b.map(|x| x * factor);
    }

    /// Forward pass without recording.
    pub fn predict(&self, x: &Mat) -> Mat {
        let mut h = x.clone();
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            h = affine(&h, &layer.w, &layer.b);
            if i + 1 < n {
                h = h.map(|v| v.max(0.0));
            }
        }
        h
    }

    /// Puts the parameters on the tape, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> ParamVars {
        let mut vars = Vec::with_capacity(self.layers.len() * 2);
        for layer in &self.layers {
            for m in [&layer.w, &layer.b] {
                vars.push(if trainable { tape.param(m.clone()) } else { tape.constant(m.clone()) });
            }
        }
        ParamVars(vars)
    }

    /// Recorded forward pass using previously bound parameters.
    pub fn forward(&self, tape: &mut Tape, params: &ParamVars, x: Var) -> Var {
        let n = self.layers.len();
        let mut h = x;
        for i in 0..n {
            h = tape.affine(h, params.0[2 * i], params.0[2 * i + 1]);
            if i + 1 < n {
                h = tape.relu(h);
            }
        }
        h
    }

    pub fn param_mats(&self) -> Vec<&Mat> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn param_mats_mut(&mut self) -> Vec<&mut Mat> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b]).collect()
    }

    pub fn num_params(&self) -> usize {
        self.param_mats().iter().map(|m| m.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.param_mats().iter().flat_map(|m| m.data.iter().copied()).collect()
    }

    /// Overwrites parameters from a flat slice; returns the number consumed.
    pub fn load_flat(&mut self, flat: &[f64]) -> usize {
        let mut offset = 0;
        for m in self.param_mats_mut() {
            let n = m.len();
            m.data.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        offset
    }

    pub fn is_finite(&self) -> bool {
        self.param_mats().iter().all(|m| m.is_finite())
    }

    /// `self <- (1 - tau) self + tau source`.
    pub fn polyak_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.param_mats_mut().into_iter().zip(source.param_mats()) {
            for (d, s) in dst.data.iter_mut().zip(&src.data) {
                *d = (1.0 - tau) * *d + tau * s;
            }
        }
    }

    /// Collects gradients for bound parameters, zeros where none flowed.
    pub fn collect_grads(&self, grads: &mut crate::tape::Grads, params: &ParamVars) -> Vec<Mat> {
        self.param_mats()
            .iter()
            .zip(&params.0)
            .map(|(m, &v)| grads.take_or_zeros(v, m.rows, m.cols))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 3e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected first and second moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            cfg,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_mlp(cfg: AdamConfig, net: &Mlp) -> Self {
        let sizes: Vec<usize> = net.param_mats().iter().map(|m| m.len()).collect();
        Self::new(cfg, &sizes)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One descent step on `params` given matching `grads`.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    pub fn step_mlp(&mut self, net: &mut Mlp, grads: &[Mat]) {
        let grad_slices: Vec<&[f64]> = grads.iter().map(|g| g.data.as_slice()).collect();
        let mut mats = net.param_mats_mut();
        let mut param_slices: Vec<&mut [f64]> = mats.iter_mut().map(|m| m.data.as_mut_slice()).collect();
        self.step(&mut param_slices, &grad_slices);
    }
}
