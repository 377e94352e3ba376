//! Straight-line reference implementation of the curriculum for a linear
//! trainer trained full-batch. Written independently of the library: plain
//! vectors, no shared helpers.

#![allow(dead_code, clippy::needless_range_loop)]

use std::f64::consts::PI;

use ddsc_core::data::Dataset;

pub struct OracleParams {
    pub epochs: usize,
    pub lambda_min: f64,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta_h: f64,
    pub epsilon: f64,
    pub lr: f64,
}

/// Weights used in each epoch (index 0 is epoch 1), followed by the weights
/// prepared after the last epoch.
pub fn oracle_weights(data: &Dataset, p: &OracleParams) -> Vec<Vec<f64>> {
    let n = data.samples.len();
    let dim = data.samples[0].features.len();
    let devices = data.num_devices;
    let mut theta = vec![0.0; dim];
    let mut protos: Vec<Option<Vec<f64>>> = vec![None; devices];
    let mut prev_loss: Vec<Option<f64>> = vec![None; n];
    let mut d = vec![0.0; n];
    let mut h_hat: Vec<Option<f64>> = vec![None; n];
    let mut pi = vec![1.0 / n as f64; n];
    let mut out = Vec::new();

    for e in 1..=p.epochs {
        out.push(pi.clone());

        let mut losses = vec![0.0; n];
        let mut z = vec![vec![0.0; dim]; n];
        for i in 0..n {
            let x = &data.samples[i].features;
            let y = data.samples[i].class as f64;
            let mut pred = 0.0;
            for k in 0..dim {
                pred += theta[k] * x[k];
            }
            losses[i] = 0.5 * (y - pred) * (y - pred);
            let mut norm = 0.0;
            for k in 0..dim {
                z[i][k] = x[k] + theta[k];
                norm += z[i][k] * z[i][k];
            }
            let norm = norm.sqrt();
            for k in 0..dim {
                z[i][k] /= norm;
            }
        }

        let total: f64 = pi.iter().sum();
        let mut step = vec![0.0; dim];
        for i in 0..n {
            let x = &data.samples[i].features;
            let y = data.samples[i].class as f64;
            let mut pred = 0.0;
            for k in 0..dim {
                pred += theta[k] * x[k];
            }
            for k in 0..dim {
                step[k] += pi[i] / total * (y - pred) * x[k];
            }
        }
        for k in 0..dim {
            theta[k] += p.lr * step[k];
        }

        for i in 0..n {
            let h = match prev_loss[i] {
                Some(prev) => (losses[i] - prev).abs(),
                None => 0.0,
            };
            d[i] = p.beta * d[i] + (1.0 - p.beta) * h;
            prev_loss[i] = Some(losses[i]);
        }

        for m in 0..devices {
            let members: Vec<usize> = (0..n).filter(|&i| data.samples[i].device == m).collect();
            if members.is_empty() {
                continue;
            }
            let mut mean = vec![0.0; dim];
            for &i in &members {
                for k in 0..dim {
                    mean[k] += z[i][k];
                }
            }
            for k in 0..dim {
                mean[k] /= members.len() as f64;
            }
            let mut blend = match &protos[m] {
                Some(old) => (0..dim).map(|k| (1.0 - p.gamma) * old[k] + p.gamma * mean[k]).collect(),
                None => mean,
            };
            let norm = blend.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut blend {
                *v /= norm;
            }
            protos[m] = Some(blend);
        }

        let seen: Vec<&Vec<f64>> = protos.iter().flatten().collect();
        for i in 0..n {
            let h = if seen.len() < 2 {
                0.5
            } else {
                let logits: Vec<f64> =
                    seen.iter().map(|mu| (0..dim).map(|k| z[i][k] * mu[k]).sum::<f64>() / p.tau).collect();
                let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
                let sum: f64 = exps.iter().sum();
                let mut ent = 0.0;
                for x in &exps {
                    let q = x / sum;
                    if q > 0.0 {
                        ent -= q * q.ln();
                    }
                }
                (ent / (seen.len() as f64).ln()).clamp(0.0, 1.0)
            };
            h_hat[i] = Some(match h_hat[i] {
                Some(prev) if seen.len() >= 2 => p.eta_h * prev + (1.0 - p.eta_h) * h,
                _ => h,
            });
        }

        let lo = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let d_bar: Vec<f64> = d.iter().map(|v| (v - lo) / (hi - lo + p.epsilon)).collect();

        let next = (e + 1).min(p.epochs) as f64;
        let lambda = p.lambda_min + (1.0 - p.lambda_min) * 0.5 * (1.0 + (PI * next / p.epochs as f64).cos());
        let scores: Vec<f64> = (0..n).map(|i| lambda * h_hat[i].unwrap() + (1.0 - lambda) * d_bar[i]).collect();
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - top).exp()).collect();
        let sum: f64 = exps.iter().sum();
        pi = exps.iter().map(|x| x / sum).collect();
    }
    out.push(pi);
    out
}
