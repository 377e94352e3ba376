//! A small deterministic trainer and dataset generator for exercising the
//! curriculum without a real model.
//!
//! The trainer keeps a single parameter vector `theta`. Embeddings are
//! `x + theta`, the loss is `0.5 * (class - theta . x)^2`, and a weighted step
//! moves `theta` along `sum_i w_i (class_i - theta . x_i) x_i`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Sample};
use crate::engine::Trainer;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedTrainer {
    pub theta: Vec<f64>,
    pub lr: f64,
}

impl ScriptedTrainer {
    pub fn new(dim: usize, lr: f64) -> Self {
        ScriptedTrainer { theta: vec![0.0; dim], lr }
    }

    fn residual(&self, sample: &Sample) -> f64 {
        let pred: f64 = self.theta.iter().zip(&sample.features).map(|(t, x)| t * x).sum();
        sample.class as f64 - pred
    }
}

impl Trainer for ScriptedTrainer {
    fn embedding_dim(&self) -> usize {
        self.theta.len()
    }

    fn embed(&self, sample: &Sample) -> Vec<f64> {
        sample.features.iter().zip(&self.theta).map(|(x, t)| x + t).collect()
    }

    fn per_sample_loss(&self, sample: &Sample) -> f64 {
        0.5 * self.residual(sample).powi(2)
    }

    fn apply_weighted_step(&mut self, batch: &[(&Sample, f64)]) {
        let mut step = vec![0.0; self.theta.len()];
        for (sample, w) in batch {
            let r = self.residual(sample);
            for (s, x) in step.iter_mut().zip(&sample.features) {
                *s += w * r * x;
            }
        }
        for (t, s) in self.theta.iter_mut().zip(step) {
            *t += self.lr * s;
        }
    }
}

/// `n` samples of width `dim` spread round-robin over `devices` devices, each
/// device shifting its samples along its own random direction.
pub fn toy_dataset(n: usize, devices: usize, dim: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<Vec<f64>> =
        (0..devices).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let samples = (0..n)
        .map(|i| {
            let device = i % devices;
            let class = rng.random_range(0..3usize);
            let features = offsets[device].iter().map(|o| o + 0.5 * rng.random_range(-1.0..1.0)).collect();
            Sample { features, class, device }
        })
        .collect();
    Dataset { samples, num_classes: 3, num_devices: devices.max(2) }
}
