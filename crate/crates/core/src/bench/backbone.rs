//! Two-layer classifier: `x -> tanh(W1 x + b1) -> W2 h + b2`, trained with
//! plain SGD on softmax cross-entropy. The hidden activation `h` is the
//! embedding handed to the curriculum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::engine::Trainer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { embedding_dim: 16, learning_rate: 0.2, batch_size: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyBackbone {
    raw_dim: usize,
    hidden: usize,
    classes: usize,
    /// Flat parameters: W1 (hidden x raw), b1, W2 (classes x hidden), b2.
    params: Vec<f64>,
    pub learning_rate: f64,
}

impl ToyBackbone {
    pub fn new(raw_dim: usize, hidden: usize, classes: usize, learning_rate: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; hidden * raw_dim + hidden + classes * hidden + classes];
        let a1 = (6.0 / (raw_dim + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + classes) as f64).sqrt();
        let w2_start = hidden * raw_dim + hidden;
        for p in &mut params[..hidden * raw_dim] {
            *p = rng.random_range(-a1..a1);
        }
        for p in &mut params[w2_start..w2_start + classes * hidden] {
            *p = rng.random_range(-a2..a2);
        }
        ToyBackbone { raw_dim, hidden, classes, params, learning_rate }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.raw_dim;
        let w2 = b1 + self.hidden;
        let b2 = w2 + self.classes * self.hidden;
        (b1, w2, b2)
    }

    fn hidden_of(&self, x: &[f64]) -> Vec<f64> {
        let (b1, _, _) = self.offsets();
        (0..self.hidden)
            .map(|j| {
                let row = &self.params[j * self.raw_dim..(j + 1) * self.raw_dim];
                let pre: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + j];
                pre.tanh()
            })
            .collect()
    }

    fn logits_of(&self, h: &[f64]) -> Vec<f64> {
        let (_, w2, b2) = self.offsets();
        (0..self.classes)
            .map(|c| {
                let row = &self.params[w2 + c * self.hidden..w2 + (c + 1) * self.hidden];
                row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.params[b2 + c]
            })
            .collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.logits_of(&self.hidden_of(x))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, v) in logits.iter().enumerate() {
            if *v > logits[best] {
                best = c;
            }
        }
        best
    }

    fn cross_entropy(logits: &[f64], class: usize) -> f64 {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        lse - logits[class]
    }

    pub fn loss(&self, sample: &Sample) -> f64 {
        Self::cross_entropy(&self.logits(&sample.features), sample.class)
    }

    /// `sum_i w_i L_i` over the batch.
    pub fn weighted_loss(&self, batch: &[(&Sample, f64)]) -> f64 {
        batch.iter().map(|(s, w)| w * self.loss(s)).sum()
    }

    /// Analytic gradient of `weighted_loss` with respect to the flat parameters.
    pub fn weighted_gradient(&self, batch: &[(&Sample, f64)]) -> Vec<f64> {
        let (b1, w2, b2) = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        for (sample, weight) in batch {
            let x = &sample.features;
            let h = self.hidden_of(x);
            let logits = self.logits_of(&h);
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            let dlogits: Vec<f64> = exps
                .iter()
                .enumerate()
                .map(|(c, e)| weight * (e / total - f64::from(u8::from(c == sample.class))))
                .collect();

            let mut dh = vec![0.0; self.hidden];
            for (c, dl) in dlogits.iter().enumerate() {
                grad[b2 + c] += dl;
                for j in 0..self.hidden {
                    grad[w2 + c * self.hidden + j] += dl * h[j];
                    dh[j] += dl * self.params[w2 + c * self.hidden + j];
                }
            }
            for j in 0..self.hidden {
                let dpre = dh[j] * (1.0 - h[j] * h[j]);
                grad[b1 + j] += dpre;
                for (k, xv) in x.iter().enumerate() {
                    grad[j * self.raw_dim + k] += dpre * xv;
                }
            }
        }
        grad
    }
}

impl Trainer for ToyBackbone {
    fn embedding_dim(&self) -> usize {
        self.hidden
    }

    fn embed(&self, sample: &Sample) -> Vec<f64> {
        self.hidden_of(&sample.features)
    }

    fn per_sample_loss(&self, sample: &Sample) -> f64 {
        self.loss(sample)
    }

    fn apply_weighted_step(&mut self, batch: &[(&Sample, f64)]) {
        let grad = self.weighted_gradient(batch);
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p -= self.learning_rate * g;
        }
    }
}
