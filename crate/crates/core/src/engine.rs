//! The curriculum loop.
//!
//! Every epoch runs in two phases. The training phase walks the dataset in a
//! seeded shuffled order, applies one weighted optimizer step per mini-batch
//! and records each visited sample's loss and detached embedding. The
//! end-of-epoch phase, which has exclusive access to the state, then
//!
//! 1. closes the loss ledger (loss change and its EMA),
//! 2. refreshes the device prototypes from the epoch's embeddings,
//! 3. scores each sample's embedding against the refreshed prototypes and
//!    smooths the normalized entropy,
//! 4. min-max normalizes the loss-change signal,
//! 5. fuses both signals with the next epoch's mixing coefficient and maps the
//!    scores to weights.
//!
//! The update block runs after every epoch rather than once after the whole
//! loop, so weights for epoch `e` only depend on what was observed before `e`.
//! Epoch 1 always trains with uniform weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{DdscError, Result};
use crate::invariance::{device_posterior, normalized_entropy, smooth_invariance, PrototypeBank, UnitEmbedding};
use crate::progress::SampleLedger;
use crate::schedule::{batch_weighted_loss, fuse_scores, scores_to_weights, weight_entropy, ScheduleConfig};
use crate::stats::Quantiles;

/// Invariance score used when fewer than two devices have prototypes.
pub const FALLBACK_INVARIANCE: f64 = 0.5;

/// What the curriculum needs from a model.
pub trait Trainer {
    fn embedding_dim(&self) -> usize;

    /// Detached feature vector for `sample`. Need not be normalized.
    fn embed(&self, sample: &Sample) -> Vec<f64>;

    fn per_sample_loss(&self, sample: &Sample) -> f64;

    /// One optimizer step on `sum_i w_i * L_i`. The weights sum to one.
    fn apply_weighted_step(&mut self, batch: &[(&Sample, f64)]);
}

/// One forward visit of a sample during the training phase.
#[derive(Debug, Clone)]
pub struct Visit {
    pub sample: usize,
    pub loss: f64,
    pub embedding: UnitEmbedding,
}

#[derive(Debug, Clone)]
pub struct EpochPass {
    pub visits: Vec<Visit>,
    /// `sum_i pi_i L_i` accumulated batch by batch, with `L_i` taken before
    /// the step that consumed it.
    pub weighted_loss: f64,
}

impl EpochPass {
    /// Per-device lists of detached embeddings.
    pub fn embeddings_by_device(&self, dataset: &Dataset) -> Vec<Vec<UnitEmbedding>> {
        let mut grouped = vec![Vec::new(); dataset.num_devices];
        for v in &self.visits {
            grouped[dataset.samples[v.sample].device].push(v.embedding.clone());
        }
        grouped
    }

    /// Latest embedding of each sample, `None` for unvisited samples.
    pub fn latest_embeddings(&self, n: usize) -> Vec<Option<&UnitEmbedding>> {
        let mut latest = vec![None; n];
        for v in &self.visits {
            latest[v.sample] = Some(&v.embedding);
        }
        latest
    }
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mixed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Runs the training phase of one epoch under fixed global `weights`.
///
/// Batches whose weight mass is zero are visited (losses and embeddings are
/// still recorded) but produce no optimizer step.
pub fn weighted_pass<T: Trainer + ?Sized>(
    trainer: &mut T,
    dataset: &Dataset,
    weights: &[f64],
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<EpochPass> {
    if weights.len() != dataset.len() {
        return Err(DdscError::LengthMismatch(weights.len(), dataset.len()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut epoch_rng(seed, epoch));

    let mut visits = Vec::with_capacity(order.len());
    let mut weighted_loss = 0.0;
    for chunk in order.chunks(batch_size.max(1)) {
        let mut losses = Vec::with_capacity(chunk.len());
        for &i in chunk {
            let sample = &dataset.samples[i];
            let loss = trainer.per_sample_loss(sample);
            if !loss.is_finite() {
                return Err(DdscError::NonFiniteLoss { sample: i, loss });
            }
            let embedding = UnitEmbedding::normalize(&trainer.embed(sample))?;
            losses.push((i, loss));
            visits.push(Visit { sample: i, loss, embedding });
        }
        let mass: f64 = chunk.iter().map(|&i| weights[i]).sum();
        if mass <= 0.0 {
            continue;
        }
        let (batch_loss, mass) = batch_weighted_loss(weights, &losses)?;
        weighted_loss += mass * batch_loss;
        let batch: Vec<(&Sample, f64)> = chunk.iter().map(|&i| (&dataset.samples[i], weights[i] / mass)).collect();
        trainer.apply_weighted_step(&batch);
    }
    Ok(EpochPass { visits, weighted_loss })
}

/// Per-epoch diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    /// Scheduled mixing coefficient for this epoch. Epoch 1 trains uniformly
    /// regardless of its value.
    pub lambda: f64,
    /// Mixing coefficient used for the weights prepared for the next epoch.
    pub next_lambda: f64,
    pub train_loss: f64,
    /// Entropy (nats) of the weights applied during this epoch.
    pub weight_entropy: f64,
    pub weights: Quantiles,
    pub next_weights: Quantiles,
    pub invariance: Quantiles,
    pub progress: Quantiles,
    pub scores: Quantiles,
    pub seen_devices: usize,
    /// True when the invariance signal fell back to a constant.
    pub invariance_fallback: bool,
}

/// Everything the curriculum carries between epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    /// Number of completed epochs.
    pub epoch: usize,
    pub bank: PrototypeBank,
    pub ledger: SampleLedger,
    pub config: ScheduleConfig,
    pub batch_size: usize,
    pub seed: u64,
}

impl CurriculumState {
    pub fn new(
        config: ScheduleConfig,
        num_samples: usize,
        num_devices: usize,
        embedding_dim: usize,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if num_samples == 0 {
            return Err(DdscError::EmptyDataset);
        }
        if batch_size == 0 {
            return Err(DdscError::InvalidConfig { field: "batch_size", reason: "must be at least 1".into() });
        }
        Ok(CurriculumState {
            epoch: 0,
            bank: PrototypeBank::new(num_devices, embedding_dim, config.gamma)?,
            ledger: SampleLedger::new(num_samples),
            config,
            batch_size,
            seed,
        })
    }

    pub fn for_dataset<T: Trainer + ?Sized>(
        config: ScheduleConfig,
        dataset: &Dataset,
        trainer: &T,
        batch_size: usize,
        seed: u64,
    ) -> Result<Self> {
        dataset.validate()?;
        Self::new(config, dataset.len(), dataset.num_devices, trainer.embedding_dim(), batch_size, seed)
    }

    /// Weights for the upcoming epoch.
    pub fn current_weights(&self) -> Vec<f64> {
        if self.epoch == 0 {
            vec![1.0 / self.ledger.len() as f64; self.ledger.len()]
        } else {
            self.ledger.weights()
        }
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        dataset.validate()?;
        if dataset.len() != self.ledger.len() {
            return Err(DdscError::LengthMismatch(dataset.len(), self.ledger.len()));
        }
        if dataset.num_devices != self.bank.num_devices() {
            return Err(DdscError::LengthMismatch(dataset.num_devices, self.bank.num_devices()));
        }
        Ok(())
    }

    pub fn run_epoch<T: Trainer + ?Sized>(&mut self, trainer: &mut T, dataset: &Dataset) -> Result<EpochReport> {
        self.check_dataset(dataset)?;
        let epoch = self.epoch + 1;
        if epoch > self.config.epochs {
            return Err(DdscError::EpochOutOfRange { epoch, total: self.config.epochs });
        }
        let weights = self.current_weights();
        for (r, w) in self.ledger.records_mut().iter_mut().zip(&weights) {
            r.applied_weight = *w;
        }

        let pass = weighted_pass(trainer, dataset, &weights, self.batch_size, self.seed, epoch)?;
        self.ledger.begin_epoch();
        for v in &pass.visits {
            self.ledger.record_loss(v.sample, v.loss)?;
        }
        self.close_epoch(epoch, &pass, dataset)
    }

    /// End-of-epoch update block.
    pub fn close_epoch(&mut self, epoch: usize, pass: &EpochPass, dataset: &Dataset) -> Result<EpochReport> {
        let cfg = self.config.clone();
        self.ledger.finalize_epoch_losses(cfg.beta)?;
        self.bank.update(&pass.embeddings_by_device(dataset), epoch)?;

        let seen = self.bank.seen_count();
        let fallback = seen < 2;
        let latest = pass.latest_embeddings(self.ledger.len());
        if fallback {
            log::warn!(
                "epoch {epoch}: only {seen} device(s) have prototypes; invariance signal held at {FALLBACK_INVARIANCE}"
            );
            for r in self.ledger.records_mut() {
                r.invariance = Some(FALLBACK_INVARIANCE);
            }
        } else {
            let bank = &self.bank;
            let entropies: Vec<Option<f64>> = latest
                .par_iter()
                .map(|z| match z {
                    Some(z) => {
                        let posterior = device_posterior(z, bank, cfg.tau)?;
                        normalized_entropy(&posterior, seen).map(Some)
                    }
                    None => Ok(None),
                })
                .collect::<Result<_>>()?;
            for (r, h) in self.ledger.records_mut().iter_mut().zip(entropies) {
                if let Some(h) = h {
                    r.invariance = Some(smooth_invariance(r.invariance, h, cfg.eta_h));
                }
            }
        }
        self.ledger.normalize_progress(cfg.epsilon)?;

        let lambda = cfg.lambda(epoch)?;
        let next_lambda = cfg.lambda((epoch + 1).min(cfg.epochs))?;
        let invariance = self.ledger.invariance();
        let progress = self.ledger.progress_norm();
        let scores = fuse_scores(&invariance, &progress, next_lambda)?;
        let next = scores_to_weights(&scores)?;
        for ((r, s), w) in self.ledger.records_mut().iter_mut().zip(&scores).zip(&next) {
            r.score = *s;
            r.weight = *w;
        }
        self.epoch = epoch;

        let applied = self.ledger.applied_weights();
        Ok(EpochReport {
            epoch,
            lambda,
            next_lambda,
            train_loss: pass.weighted_loss,
            weight_entropy: weight_entropy(&applied),
            weights: Quantiles::of(&applied),
            next_weights: Quantiles::of(&next),
            invariance: Quantiles::of(&invariance),
            progress: Quantiles::of(&progress),
            scores: Quantiles::of(&scores),
            seen_devices: seen,
            invariance_fallback: fallback,
        })
    }
}

/// Runs `config.epochs` epochs from a fresh state.
pub fn run_training<T: Trainer + ?Sized>(
    config: ScheduleConfig,
    trainer: &mut T,
    dataset: &Dataset,
    batch_size: usize,
    seed: u64,
) -> Result<(Vec<EpochReport>, CurriculumState)> {
    let mut state = CurriculumState::for_dataset(config, dataset, trainer, batch_size, seed)?;
    let mut reports = Vec::with_capacity(state.config.epochs);
    for epoch in 1..=state.config.epochs {
        let report =
            state.run_epoch(trainer, dataset).map_err(|e| DdscError::AtEpoch { epoch, source: Box::new(e) })?;
        reports.push(report);
    }
    Ok((reports, state))
}
