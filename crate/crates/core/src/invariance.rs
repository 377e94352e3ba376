//! Domain-invariance signal.
//!
//! Each device owns a unit-norm prototype in embedding space. A sample's
//! embedding is scored against every seen prototype by cosine similarity, the
//! scores go through a temperature-scaled softmax, and the normalized entropy
//! of that posterior measures how weakly the embedding identifies its device.
//! High entropy means a more device-invariant sample.
//!
//! Prototypes are refreshed once per epoch from detached embeddings: an EMA
//! toward the epoch mean followed by l2 re-normalization, or a direct
//! initialization the first time a device shows up.

use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};

const UNIT_TOLERANCE: f64 = 1e-9;

/// A feature vector with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitEmbedding(Vec<f64>);

impl UnitEmbedding {
    /// Normalizes a raw feature vector. Fails on a zero or non-finite norm.
    pub fn normalize(raw: &[f64]) -> Result<Self> {
        let norm = l2_norm(raw);
        if !norm.is_finite() || norm == 0.0 {
            return Err(DdscError::ZeroNormEmbedding);
        }
        Ok(UnitEmbedding(raw.iter().map(|v| v / norm).collect()))
    }

    /// Wraps a vector that must already be unit norm.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&values);
        if (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(DdscError::NotUnitNorm(norm));
        }
        Ok(UnitEmbedding(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Online device prototypes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeBank {
    prototypes: Vec<Vec<f64>>,
    seen: Vec<bool>,
    dim: usize,
    gamma: f64,
    epoch_of_last_update: usize,
}

impl PrototypeBank {
    pub fn new(num_devices: usize, dim: usize, gamma: f64) -> Result<Self> {
        if num_devices < 2 {
            return Err(DdscError::InvalidConfig {
                field: "num_devices",
                reason: format!("need at least 2 devices, got {num_devices}"),
            });
        }
        if dim == 0 {
            return Err(DdscError::InvalidConfig { field: "embedding_dim", reason: "must be at least 1".into() });
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(DdscError::InvalidConfig { field: "gamma", reason: format!("{gamma} out of (0,1]") });
        }
        Ok(PrototypeBank {
            prototypes: vec![vec![0.0; dim]; num_devices],
            seen: vec![false; num_devices],
            dim,
            gamma,
            epoch_of_last_update: 0,
        })
    }

    pub fn num_devices(&self) -> usize {
        self.seen.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn epoch_of_last_update(&self) -> usize {
        self.epoch_of_last_update
    }

    pub fn is_seen(&self, device: usize) -> bool {
        self.seen.get(device).copied().unwrap_or(false)
    }

    pub fn seen_count(&self) -> usize {
        self.seen.iter().filter(|s| **s).count()
    }

    /// Prototype of `device`, or `None` if the device has not appeared yet.
    pub fn prototype(&self, device: usize) -> Option<&[f64]> {
        if self.is_seen(device) {
            Some(&self.prototypes[device])
        } else {
            None
        }
    }

    /// End-of-epoch refresh. `per_device[m]` holds the detached unit
    /// embeddings observed for device `m` during the epoch.
    ///
    /// The bank is left untouched if any device fails, so a degenerate mean
    /// never leaves a half-updated bank behind.
    pub fn update(&mut self, per_device: &[Vec<UnitEmbedding>], epoch: usize) -> Result<()> {
        if per_device.len() != self.num_devices() {
            return Err(DdscError::LengthMismatch(per_device.len(), self.num_devices()));
        }
        let mut staged: Vec<Option<Vec<f64>>> = Vec::with_capacity(per_device.len());
        for (device, embeddings) in per_device.iter().enumerate() {
            if embeddings.is_empty() {
                staged.push(None);
                continue;
            }
            let mut mean = vec![0.0; self.dim];
            for z in embeddings {
                if z.dim() != self.dim {
                    return Err(DdscError::DimensionMismatch { expected: self.dim, got: z.dim() });
                }
                for (acc, v) in mean.iter_mut().zip(z.as_slice()) {
                    *acc += v;
                }
            }
            let count = embeddings.len() as f64;
            mean.iter_mut().for_each(|v| *v /= count);
            let mean_norm = l2_norm(&mean);
            if mean_norm == 0.0 || !mean_norm.is_finite() {
                return Err(DdscError::DegeneratePrototypeMean(device));
            }

            let blended = if self.seen[device] {
                self.prototypes[device]
                    .iter()
                    .zip(&mean)
                    .map(|(old, m)| (1.0 - self.gamma) * old + self.gamma * m)
                    .collect::<Vec<_>>()
            } else {
                mean
            };
            let norm = l2_norm(&blended);
            if norm == 0.0 || !norm.is_finite() {
                return Err(DdscError::DegeneratePrototypeMean(device));
            }
            staged.push(Some(blended.into_iter().map(|v| v / norm).collect()));
        }

        for (device, update) in staged.into_iter().enumerate() {
            if let Some(proto) = update {
                self.prototypes[device] = proto;
                self.seen[device] = true;
            }
        }
        self.epoch_of_last_update = epoch;
        Ok(())
    }
}

/// Temperature-scaled posterior over devices. Unseen devices hold probability 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DevicePosterior {
    pub probs: Vec<f64>,
    pub temperature: f64,
}

/// Softmax of cosine scores `z . mu_m / tau` over the seen devices.
pub fn device_posterior(z: &UnitEmbedding, bank: &PrototypeBank, tau: f64) -> Result<DevicePosterior> {
    if tau <= 0.0 || !tau.is_finite() {
        return Err(DdscError::InvalidTemperature(tau));
    }
    if bank.seen_count() == 0 {
        return Err(DdscError::EmptyPrototypeBank);
    }
    if z.dim() != bank.dim() {
        return Err(DdscError::DimensionMismatch { expected: bank.dim(), got: z.dim() });
    }
    let scores: Vec<Option<f64>> =
        (0..bank.num_devices()).map(|m| bank.prototype(m).map(|mu| z.dot(mu) / tau)).collect();
    let max = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - max).exp())).collect();
    let total: f64 = exps.iter().sum();
    Ok(DevicePosterior { probs: exps.into_iter().map(|e| e / total).collect(), temperature: tau })
}

/// Shannon entropy (nats) of the posterior divided by `ln(effective_devices)`,
/// clamped to [0, 1]. Zero-probability terms contribute nothing.
pub fn normalized_entropy(posterior: &DevicePosterior, effective_devices: usize) -> Result<f64> {
    if effective_devices < 2 {
        return Err(DdscError::TooFewDevices(effective_devices));
    }
    let h: f64 = posterior.probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
    Ok((h / (effective_devices as f64).ln()).clamp(0.0, 1.0))
}

/// EMA of the normalized entropy; the first scored epoch takes the raw value.
pub fn smooth_invariance(prev: Option<f64>, entropy: f64, eta: f64) -> f64 {
    match prev {
        None => entropy,
        Some(prev) => (eta * prev + (1.0 - eta) * entropy).clamp(0.0, 1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> UnitEmbedding {
        UnitEmbedding::normalize(v).unwrap()
    }

    fn basis_bank() -> PrototypeBank {
        let mut bank = PrototypeBank::new(2, 2, 0.3).unwrap();
        bank.update(&[vec![unit(&[1.0, 0.0])], vec![unit(&[0.0, 1.0])]], 1).unwrap();
        bank
    }

    #[test]
    fn posterior_on_basis_prototypes() {
        // softmax([1, 0]) evaluated as scalars: e / (e + 1), 1 / (e + 1)
        let p = device_posterior(&unit(&[1.0, 0.0]), &basis_bank(), 1.0).unwrap();
        assert!((p.probs[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((p.probs[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn equidistant_embedding_is_uniform() {
        let p = device_posterior(&unit(&[1.0, 1.0]), &basis_bank(), 0.1).unwrap();
        assert!((p.probs[0] - 0.5).abs() < 1e-12);
        assert!((p.probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn low_temperature_concentrates() {
        let p = device_posterior(&unit(&[0.9, 0.1]), &basis_bank(), 1e-6).unwrap();
        assert!((p.probs[0] - 1.0).abs() < 1e-6);
        assert!(p.probs[1] < 1e-6);
    }

    #[test]
    fn posterior_errors() {
        let bank = PrototypeBank::new(3, 2, 0.3).unwrap();
        assert_eq!(device_posterior(&unit(&[1.0, 0.0]), &bank, 0.1), Err(DdscError::EmptyPrototypeBank));
        assert_eq!(device_posterior(&unit(&[1.0, 0.0]), &basis_bank(), 0.0), Err(DdscError::InvalidTemperature(0.0)));
    }

    #[test]
    fn unseen_devices_excluded() {
        let mut bank = PrototypeBank::new(3, 2, 0.3).unwrap();
        bank.update(&[vec![unit(&[1.0, 0.0])], vec![], vec![unit(&[0.0, 1.0])]], 1).unwrap();
        let p = device_posterior(&unit(&[1.0, 0.0]), &bank, 1.0).unwrap();
        assert_eq!(p.probs[1], 0.0);
        assert!((p.probs[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((normalized_entropy(&p, bank.seen_count()).unwrap() - 0.8399415379831692).abs() < 1e-12);
    }

    #[test]
    fn entropy_cases() {
        let uniform = DevicePosterior { probs: vec![1.0 / 6.0; 6], temperature: 1.0 };
        assert!((normalized_entropy(&uniform, 6).unwrap() - 1.0).abs() < 1e-12);

        let one_hot = DevicePosterior { probs: vec![1.0, 0.0, 0.0, 0.0], temperature: 1.0 };
        assert_eq!(normalized_entropy(&one_hot, 4).unwrap(), 0.0);

        // -(0.7311 ln 0.7311 + 0.2689 ln 0.2689) / ln 2, evaluated as scalars
        let two = DevicePosterior { probs: vec![0.7311, 0.2689], temperature: 1.0 };
        assert!((normalized_entropy(&two, 2).unwrap() - 0.8398817732830622).abs() < 1e-12);

        assert_eq!(normalized_entropy(&two, 1), Err(DdscError::TooFewDevices(1)));
    }

    #[test]
    fn prototype_update_rules() {
        // gamma = 1 reduces to the normalized batch mean
        let mut bank = PrototypeBank::new(2, 2, 1.0).unwrap();
        bank.update(&[vec![unit(&[1.0, 0.0])], vec![unit(&[0.0, 1.0])]], 1).unwrap();
        bank.update(&[vec![unit(&[0.0, 1.0]), unit(&[1.0, 1.0])], vec![]], 2).unwrap();
        let b = [0.5 * 0.7071067811865475, 0.5 + 0.5 * 0.7071067811865475];
        let bn = l2_norm(&b);
        let proto = bank.prototype(0).unwrap();
        assert!((proto[0] - b[0] / bn).abs() < 1e-12);
        assert!((proto[1] - b[1] / bn).abs() < 1e-12);
        // empty list keeps the old prototype bit for bit
        assert_eq!(bank.prototype(1).unwrap(), &[0.0, 1.0]);
        assert_eq!(bank.epoch_of_last_update(), 2);

        // gamma = 0.5, old e1, mean e2 -> [1/sqrt2, 1/sqrt2]
        let mut bank = PrototypeBank::new(2, 2, 0.5).unwrap();
        bank.update(&[vec![unit(&[1.0, 0.0])], vec![]], 1).unwrap();
        assert!(!bank.is_seen(1));
        bank.update(&[vec![unit(&[0.0, 1.0])], vec![]], 2).unwrap();
        let proto = bank.prototype(0).unwrap();
        assert!((proto[0] - 0.7071067811865475).abs() < 1e-12);
        assert!((proto[1] - 0.7071067811865475).abs() < 1e-12);
    }

    #[test]
    fn degenerate_mean_rejected_without_mutation() {
        let mut bank = basis_bank();
        let before = bank.clone();
        let err = bank.update(&[vec![unit(&[1.0, 0.0]), unit(&[-1.0, 0.0])], vec![unit(&[1.0, 0.0])]], 2);
        assert_eq!(err, Err(DdscError::DegeneratePrototypeMean(0)));
        assert_eq!(bank, before);
    }

    #[test]
    fn smoothing() {
        assert_eq!(smooth_invariance(None, 0.7, 0.9), 0.7);
        assert_eq!(smooth_invariance(Some(0.5), 0.5, 0.3), 0.5);
        assert!((smooth_invariance(Some(1.0), 0.0, 0.9) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn unit_embedding_validation() {
        assert_eq!(UnitEmbedding::normalize(&[0.0, 0.0]), Err(DdscError::ZeroNormEmbedding));
        assert!(UnitEmbedding::from_unit(vec![0.6, 0.8]).is_ok());
        assert!(UnitEmbedding::from_unit(vec![0.6, 0.9]).is_err());
    }
}
