//! Learning-progress signal and the per-sample ledger.
//!
//! For every sample the ledger keeps the running mean of its loss over the
//! current epoch, the previous epoch's loss, and the EMA of the absolute
//! epoch-to-epoch loss change. After each epoch the smoothed change is min-max
//! normalized across the dataset.

use serde::{Deserialize, Serialize};

use crate::error::{DdscError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    /// Loss from the last epoch the sample was visited. `None` until its first visit.
    pub prev_loss: Option<f64>,
    pub loss_sum: f64,
    pub loss_count: u32,
    /// Latest instantaneous loss change `|l(e) - l(e-1)|`.
    pub last_change: f64,
    /// Smoothed loss change, always >= 0.
    pub progress: f64,
    /// Min-max normalized `progress`, in [0, 1].
    pub progress_norm: f64,
    /// Smoothed normalized prototype entropy, `None` until first scored.
    pub invariance: Option<f64>,
    pub score: f64,
    /// Weight prepared for the next epoch.
    pub weight: f64,
    /// Weight applied during the epoch that just finished.
    pub applied_weight: f64,
}

impl SampleRecord {
    fn new(n: usize) -> Self {
        let uniform = 1.0 / n as f64;
        SampleRecord {
            prev_loss: None,
            loss_sum: 0.0,
            loss_count: 0,
            last_change: 0.0,
            progress: 0.0,
            progress_norm: 0.0,
            invariance: None,
            score: 0.0,
            weight: uniform,
            applied_weight: uniform,
        }
    }

    /// Mean loss recorded so far this epoch.
    pub fn epoch_mean(&self) -> Option<f64> {
        (self.loss_count > 0).then(|| self.loss_sum / self.loss_count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLedger {
    records: Vec<SampleRecord>,
    finalized_epochs: usize,
    awaiting_records: bool,
}

impl SampleLedger {
    pub fn new(num_samples: usize) -> Self {
        SampleLedger {
            records: (0..num_samples).map(|_| SampleRecord::new(num_samples)).collect(),
            finalized_epochs: 0,
            awaiting_records: false,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn finalized_epochs(&self) -> usize {
        self.finalized_epochs
    }

    pub fn record(&self, i: usize) -> &SampleRecord {
        &self.records[i]
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub(crate) fn records_mut(&mut self) -> &mut [SampleRecord] {
        &mut self.records
    }

    /// Opens a new recording phase. Needed only when an epoch records nothing.
    pub fn begin_epoch(&mut self) {
        self.awaiting_records = false;
    }

    pub fn record_loss(&mut self, i: usize, loss: f64) -> Result<()> {
        let len = self.records.len();
        let record = self.records.get_mut(i).ok_or(DdscError::SampleOutOfRange { index: i, len })?;
        if !loss.is_finite() {
            return Err(DdscError::NonFiniteLoss { sample: i, loss });
        }
        if loss < 0.0 {
            return Err(DdscError::NegativeLoss { sample: i, loss });
        }
        record.loss_sum += loss;
        record.loss_count += 1;
        self.awaiting_records = false;
        Ok(())
    }

    /// Closes the epoch: `h = |l(e) - l(e-1)|`, `D = beta * D + (1 - beta) * h`.
    ///
    /// A sample with no recorded loss this epoch, or with no earlier loss to
    /// compare against, gets `h = 0` and keeps its previous loss.
    pub fn finalize_epoch_losses(&mut self, beta: f64) -> Result<()> {
        if self.awaiting_records {
            return Err(DdscError::DoubleFinalize);
        }
        for r in &mut self.records {
            let current = r.epoch_mean();
            let h = match (current, r.prev_loss) {
                (Some(cur), Some(prev)) => (cur - prev).abs(),
                _ => 0.0,
            };
            r.last_change = h;
            r.progress = beta * r.progress + (1.0 - beta) * h;
            if current.is_some() {
                r.prev_loss = current;
            }
            r.loss_sum = 0.0;
            r.loss_count = 0;
        }
        self.finalized_epochs += 1;
        self.awaiting_records = true;
        Ok(())
    }

    /// `D_bar = (D - D_min) / (D_max - D_min + epsilon)` over all samples.
    pub fn normalize_progress(&mut self, epsilon: f64) -> Result<()> {
        if self.records.is_empty() {
            return Err(DdscError::EmptyLedger);
        }
        let (min, max) = self
            .records
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.progress), hi.max(r.progress)));
        let denom = max - min + epsilon;
        for r in &mut self.records {
            r.progress_norm = ((r.progress - min) / denom).clamp(0.0, 1.0);
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.weight).collect()
    }

    pub fn applied_weights(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.applied_weight).collect()
    }

    pub fn progress_norm(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.progress_norm).collect()
    }

    pub fn progress(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.progress).collect()
    }

    /// Smoothed invariance per sample; unscored samples read as 0.
    pub fn invariance(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.invariance.unwrap_or(0.0)).collect()
    }
}
