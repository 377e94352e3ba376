//! Signal fusion: the cosine-decayed mixing coefficient, fused curriculum
//! scores, and the softmax map from scores to sample weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};

/// Hyperparameters of the curriculum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Total number of epochs `T`.
    pub epochs: usize,
    /// Floor of the mixing coefficient.
    pub lambda_min: f64,
    /// Temperature of the device posterior.
    pub tau: f64,
    /// EMA rate of the loss-change signal.
    pub beta: f64,
    /// EMA rate of the device prototypes.
    pub gamma: f64,
    /// EMA rate of the invariance signal.
    pub eta_h: f64,
    /// Guard in the min-max normalization denominator.
    pub epsilon: f64,
    /// Ablation knob: hold the mixing coefficient constant instead of decaying it.
    #[serde(default)]
    pub fixed_lambda: Option<f64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            epochs: 40,
            lambda_min: 0.2,
            tau: 0.1,
            beta: 0.9,
            gamma: 0.3,
            eta_h: 0.7,
            epsilon: 1e-12,
            fixed_lambda: None,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: String) -> Result<()> {
            Err(DdscError::InvalidConfig { field, reason })
        }
        if self.epochs < 1 {
            return bad("epochs", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.lambda_min) {
            return bad("lambda_min", format!("{} out of [0,1)", self.lambda_min));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau", format!("{} must be positive", self.tau));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", format!("{} out of (0,1)", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", format!("{} out of (0,1]", self.gamma));
        }
        if !(self.eta_h > 0.0 && self.eta_h < 1.0) {
            return bad("eta_h", format!("{} out of (0,1)", self.eta_h));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", format!("{} must be positive", self.epsilon));
        }
        if let Some(l) = self.fixed_lambda {
            if !(0.0..=1.0).contains(&l) {
                return bad("fixed_lambda", format!("{l} out of [0,1]"));
            }
        }
        Ok(())
    }

    /// Mixing coefficient for `epoch`, honoring `fixed_lambda`.
    pub fn lambda(&self, epoch: usize) -> Result<f64> {
        let scheduled = lambda_at(epoch, self.epochs, self.lambda_min)?;
        Ok(self.fixed_lambda.unwrap_or(scheduled))
    }
}

/// `lambda_min + (1 - lambda_min) * (1 + cos(pi * e / T)) / 2` for `e` in `1..=T`.
pub fn lambda_at(epoch: usize, total: usize, lambda_min: f64) -> Result<f64> {
    if epoch < 1 || epoch > total {
        return Err(DdscError::EpochOutOfRange { epoch, total });
    }
    if epoch == total {
        // Land on the floor exactly at the last epoch.
        return Ok(lambda_min);
    }
    let rho = epoch as f64 / total as f64;
    Ok(lambda_min + (1.0 - lambda_min) * 0.5 * (1.0 + (PI * rho).cos()))
}

/// `s_i = lambda * H_i + (1 - lambda) * D_i`.
pub fn fuse_scores(invariance: &[f64], progress: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if invariance.len() != progress.len() {
        return Err(DdscError::LengthMismatch(invariance.len(), progress.len()));
    }
    Ok(invariance.iter().zip(progress).map(|(h, d)| lambda * h + (1.0 - lambda) * d).collect())
}

/// Max-subtracted softmax over all scores.
pub fn scores_to_weights(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(DdscError::EmptyLedger);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(DdscError::NonFiniteScore(i));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Weighted loss of a mini-batch with the global weights renormalized to
/// sum to one inside the batch.
///
/// Returns `(loss, mass)` where `mass` is the batch's share of the global
/// weight. Summing `mass * loss` over a partition of the dataset recovers
/// the full weighted objective.
pub fn batch_weighted_loss(weights: &[f64], batch: &[(usize, f64)]) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(DdscError::EmptyBatch);
    }
    let mut mass = 0.0;
    for &(i, _) in batch {
        let w = weights.get(i).ok_or(DdscError::SampleOutOfRange { index: i, len: weights.len() })?;
        mass += w;
    }
    if mass <= 0.0 {
        return Err(DdscError::ZeroBatchMass);
    }
    let loss = batch.iter().map(|&(i, l)| weights[i] / mass * l).sum();
    Ok((loss, mass))
}

/// Shannon entropy (nats) of a weight vector.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    weights.iter().filter(|w| **w > 0.0).map(|w| -w * w.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_at(40, 40, 0.2).unwrap(), 0.2);
        assert!((lambda_at(5, 10, 0.2).unwrap() - 0.6).abs() < 1e-12);
        assert!(lambda_at(1, 1000, 0.2).unwrap() > 0.9999);
        assert!(lambda_at(0, 10, 0.2).is_err());
        assert!(lambda_at(11, 10, 0.2).is_err());
    }

    #[test]
    fn fusion_regimes() {
        let h = [0.1, 0.5, 0.9];
        let d = [0.7, 1.0, 0.0];
        assert_eq!(fuse_scores(&h, &d, 1.0).unwrap(), h.to_vec());
        assert_eq!(fuse_scores(&h, &d, 0.0).unwrap(), d.to_vec());
        let s = fuse_scores(&[0.5], &[1.0], 0.6).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-12);
        assert!(fuse_scores(&h, &d[..2], 0.5).is_err());
    }

    #[test]
    fn softmax_weights() {
        assert_eq!(scores_to_weights(&[0.3; 4]).unwrap(), vec![0.25; 4]);
        let w = scores_to_weights(&[1.0, 0.0]).unwrap();
        assert!((w[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((w[1] - 0.2689414213699951).abs() < 1e-12);
        assert_eq!(scores_to_weights(&[0.0, f64::NAN]), Err(DdscError::NonFiniteScore(1)));
    }

    #[test]
    fn batch_loss() {
        let w = [0.1, 0.2, 0.3, 0.4];
        let full = [(0, 1.0), (1, 2.0), (2, 3.0), (3, 4.0)];
        let (loss, mass) = batch_weighted_loss(&w, &full).unwrap();
        assert!((loss - 3.0).abs() < 1e-12);
        assert!((mass - 1.0).abs() < 1e-12);

        let (loss, _) = batch_weighted_loss(&[0.25; 4], &[(1, 2.0), (3, 5.0)]).unwrap();
        assert!((loss - 3.5).abs() < 1e-12);

        let (loss, mass) = batch_weighted_loss(&[0.8, 0.2], &[(0, 5.0)]).unwrap();
        assert_eq!((loss, mass), (5.0, 0.8));

        assert_eq!(batch_weighted_loss(&[0.0, 1.0], &[(0, 1.0)]), Err(DdscError::ZeroBatchMass));
        assert_eq!(batch_weighted_loss(&w, &[]), Err(DdscError::EmptyBatch));
    }

    #[test]
    fn config_validation() {
        assert!(ScheduleConfig::default().validate().is_ok());
        let cfg = ScheduleConfig { lambda_min: 1.5, ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("out of [0,1)"), "{err}");
        assert!(ScheduleConfig { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(ScheduleConfig { epochs: 0, ..Default::default() }.validate().is_err());
    }
}
