//! Running observation statistics (Welford) used to standardise network inputs.

use serde::{Deserialize, Serialize};

use crate::mat::Mat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub mean: Vec<f64>,
    /// Sum of squared deviations.
    pub m2: Vec<f64>,
    pub count: f64,
    pub clip: f64,
    /// When false, `normalize` is the identity.
    pub enabled: bool,
}

const VAR_EPS: f64 = 1e-8;

impl RunningNorm {
    pub fn new(dim: usize, enabled: bool) -> Self {
        Self { mean: vec![0.0; dim], m2: vec![0.0; dim], count: 0.0, clip: 5.0, enabled }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim());
        self.count += 1.0;
        for ((m, s), &v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = v - *m;
            *m += delta / self.count;
            *s += delta * (v - *m);
        }
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2.0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|s| s / self.count).collect()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        if !self.enabled || self.count < 2.0 {
            return x.to_vec();
        }
        let clip = self.clip;
        x.iter()
            .zip(&self.mean)
            .zip(self.variance())
            .map(|((&v, m), var)| ((v - m) / (var + VAR_EPS).sqrt()).clamp(-clip, clip))
            .collect()
    }

    pub fn normalize_mat(&self, x: &Mat) -> Mat {
        if !self.enabled || self.count < 2.0 {
            return x.clone();
        }
        let mut out = Vec::with_capacity(x.len());
        for r in 0..x.rows {
            out.extend(self.normalize(x.row(r)));
        }
        Mat::from_vec(x.rows, x.cols, out)
    }
}
