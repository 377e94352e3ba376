//! Weighting strategies compared on the desk benchmark.
//!
//! All of them drive the same [`weighted_pass`] with the same shuffle seed and
//! differ only in the weights they hand it.
//!
//! - `ddsc`: the dynamic dual-signal curriculum.
//! - `uniform`: `1/N` every epoch.
//! - `static_entropy`: after one uniform warm-up epoch, rank samples once by
//!   device-posterior entropy (high first) and expose a growing top fraction.
//!   The ranking is never revisited.
//! - `self_paced`: after a uniform first epoch, keep the lowest-loss fraction
//!   of samples from the previous epoch, with the fraction growing linearly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::engine::{weighted_pass, CurriculumState, EpochPass, Trainer, FALLBACK_INVARIANCE};
use crate::error::{DdscError, Result};
use crate::invariance::{device_posterior, normalized_entropy, PrototypeBank, UnitEmbedding};
use crate::schedule::{weight_entropy, ScheduleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Ddsc,
    Uniform,
    StaticEntropy,
    SelfPaced,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Ddsc, Strategy::Uniform, Strategy::StaticEntropy, Strategy::SelfPaced];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Ddsc => "ddsc",
            Strategy::Uniform => "uniform",
            Strategy::StaticEntropy => "static_entropy",
            Strategy::SelfPaced => "self_paced",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Strategy::ALL.into_iter().find(|st| st.name() == s.trim()).ok_or_else(|| {
            format!("unknown strategy '{s}' (expected one of ddsc, uniform, static_entropy, self_paced)")
        })
    }
}

/// Fraction of the dataset exposed at each epoch, linear from `start` at
/// epoch 1 to `end` at epoch `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposureSchedule {
    pub start: f64,
    pub end: f64,
}

impl Default for ExposureSchedule {
    fn default() -> Self {
        ExposureSchedule { start: 0.3, end: 1.0 }
    }
}

impl ExposureSchedule {
    pub fn fraction(&self, epoch: usize, total: usize) -> f64 {
        if total <= 1 {
            return self.end;
        }
        let t = (epoch.saturating_sub(1)) as f64 / (total - 1) as f64;
        self.start + (self.end - self.start) * t.clamp(0.0, 1.0)
    }

    pub fn count(&self, epoch: usize, total: usize, n: usize) -> usize {
        ((self.fraction(epoch, total) * n as f64).ceil() as usize).clamp(1, n)
    }
}

/// Uniform weight over the first `k` entries of `order`, zero elsewhere.
fn top_k_weights(order: &[usize], k: usize) -> Vec<f64> {
    let mut w = vec![0.0; order.len()];
    for &i in &order[..k] {
        w[i] = 1.0 / k as f64;
    }
    w
}

/// Entropy ranking frozen after the warm-up epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEntropyPlan {
    /// Sample indices by descending entropy, ties by ascending index.
    pub order: Vec<usize>,
    pub entropies: Vec<f64>,
    pub schedule: ExposureSchedule,
    pub epochs: usize,
}

impl StaticEntropyPlan {
    /// Builds the ranking from one embedding per sample, with prototypes
    /// initialized from those same embeddings.
    pub fn from_embeddings(
        embeddings: &[UnitEmbedding],
        devices: &[usize],
        num_devices: usize,
        tau: f64,
        schedule: ExposureSchedule,
        epochs: usize,
    ) -> Result<Self> {
        if embeddings.len() != devices.len() {
            return Err(DdscError::LengthMismatch(embeddings.len(), devices.len()));
        }
        let dim = embeddings.first().ok_or(DdscError::EmptyDataset)?.dim();
        let mut grouped = vec![Vec::new(); num_devices];
        for (z, &m) in embeddings.iter().zip(devices) {
            grouped[m].push(z.clone());
        }
        let mut bank = PrototypeBank::new(num_devices, dim, 1.0)?;
        bank.update(&grouped, 1)?;
        let seen = bank.seen_count();
        let entropies = embeddings
            .iter()
            .map(|z| {
                if seen < 2 {
                    Ok(FALLBACK_INVARIANCE)
                } else {
                    normalized_entropy(&device_posterior(z, &bank, tau)?, seen)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut order: Vec<usize> = (0..embeddings.len()).collect();
        order.sort_by(|&a, &b| entropies[b].total_cmp(&entropies[a]).then(a.cmp(&b)));
        Ok(StaticEntropyPlan { order, entropies, schedule, epochs })
    }

    /// Weights for `epoch` (epoch 1 is the uniform warm-up).
    pub fn weights_at(&self, epoch: usize) -> Vec<f64> {
        let n = self.order.len();
        if epoch <= 1 {
            return vec![1.0 / n as f64; n];
        }
        top_k_weights(&self.order, self.schedule.count(epoch, self.epochs, n))
    }
}

/// Embeds every sample with `trainer` and freezes the entropy ranking.
pub fn static_entropy_weights<T: Trainer + ?Sized>(
    dataset: &Dataset,
    trainer: &T,
    tau: f64,
    schedule: ExposureSchedule,
    epochs: usize,
) -> Result<StaticEntropyPlan> {
    let embeddings =
        dataset.samples.iter().map(|s| UnitEmbedding::normalize(&trainer.embed(s))).collect::<Result<Vec<_>>>()?;
    StaticEntropyPlan::from_embeddings(&embeddings, &dataset.devices(), dataset.num_devices, tau, schedule, epochs)
}

/// Outcome of one epoch under any strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyEpoch {
    pub lambda: Option<f64>,
    pub train_loss: f64,
    pub weight_entropy: f64,
}

/// Per-run state of a strategy.
#[derive(Debug, Clone)]
pub enum StrategyRunner {
    Ddsc(Box<CurriculumState>),
    Uniform,
    StaticEntropy(Option<StaticEntropyPlan>),
    SelfPaced(Option<Vec<f64>>),
}

pub struct RunSettings {
    pub schedule: ScheduleConfig,
    pub exposure: ExposureSchedule,
    pub batch_size: usize,
    pub seed: u64,
}

impl StrategyRunner {
    pub fn new<T: Trainer + ?Sized>(
        strategy: Strategy,
        dataset: &Dataset,
        trainer: &T,
        settings: &RunSettings,
    ) -> Result<Self> {
        dataset.validate()?;
        Ok(match strategy {
            Strategy::Ddsc => StrategyRunner::Ddsc(Box::new(CurriculumState::for_dataset(
                settings.schedule.clone(),
                dataset,
                trainer,
                settings.batch_size,
                settings.seed,
            )?)),
            Strategy::Uniform => StrategyRunner::Uniform,
            Strategy::StaticEntropy => StrategyRunner::StaticEntropy(None),
            Strategy::SelfPaced => StrategyRunner::SelfPaced(None),
        })
    }

    pub fn curriculum_state(&self) -> Option<&CurriculumState> {
        match self {
            StrategyRunner::Ddsc(state) => Some(state),
            _ => None,
        }
    }

    fn weights(&self, epoch: usize, n: usize, settings: &RunSettings) -> Vec<f64> {
        let uniform = || vec![1.0 / n as f64; n];
        match self {
            StrategyRunner::Ddsc(state) => state.current_weights(),
            StrategyRunner::Uniform => uniform(),
            StrategyRunner::StaticEntropy(plan) => plan.as_ref().map_or_else(uniform, |p| p.weights_at(epoch)),
            StrategyRunner::SelfPaced(losses) => match losses {
                None => uniform(),
                Some(losses) => {
                    let mut order: Vec<usize> = (0..n).collect();
                    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
                    top_k_weights(&order, settings.exposure.count(epoch, settings.schedule.epochs, n))
                }
            },
        }
    }

    /// Runs epoch `epoch` (1-based).
    pub fn run_epoch<T: Trainer + ?Sized>(
        &mut self,
        trainer: &mut T,
        dataset: &Dataset,
        epoch: usize,
        settings: &RunSettings,
    ) -> Result<StrategyEpoch> {
        if let StrategyRunner::Ddsc(state) = self {
            let report = state.run_epoch(trainer, dataset)?;
            return Ok(StrategyEpoch {
                lambda: Some(report.lambda),
                train_loss: report.train_loss,
                weight_entropy: report.weight_entropy,
            });
        }
        let n = dataset.len();
        let weights = self.weights(epoch, n, settings);
        let pass = weighted_pass(trainer, dataset, &weights, settings.batch_size, settings.seed, epoch)?;
        self.observe(&pass, dataset, settings)?;
        Ok(StrategyEpoch { lambda: None, train_loss: pass.weighted_loss, weight_entropy: weight_entropy(&weights) })
    }

    fn observe(&mut self, pass: &EpochPass, dataset: &Dataset, settings: &RunSettings) -> Result<()> {
        let n = dataset.len();
        match self {
            StrategyRunner::StaticEntropy(plan @ None) => {
                let latest = pass.latest_embeddings(n);
                let embeddings =
                    latest.into_iter().map(|z| z.cloned().ok_or(DdscError::EmptyBatch)).collect::<Result<Vec<_>>>()?;
                *plan = Some(StaticEntropyPlan::from_embeddings(
                    &embeddings,
                    &dataset.devices(),
                    dataset.num_devices,
                    settings.schedule.tau,
                    settings.exposure,
                    settings.schedule.epochs,
                )?);
            }
            StrategyRunner::SelfPaced(losses) => {
                let mut sums = vec![0.0; n];
                let mut counts = vec![0u32; n];
                for v in &pass.visits {
                    sums[v.sample] += v.loss;
                    counts[v.sample] += 1;
                }
                let prev = losses.take();
                *losses = Some(
                    (0..n)
                        .map(|i| match counts[i] {
                            0 => prev.as_ref().map_or(0.0, |p| p[i]),
                            c => sums[i] / f64::from(c),
                        })
                        .collect(),
                );
            }
            _ => {}
        }
        Ok(())
    }
}
