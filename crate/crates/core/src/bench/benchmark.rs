//! Paired multi-seed comparison of weighting strategies.
//!
//! For each seed every strategy sees the same generated dataset, the same
//! initial parameters and the same batch shuffles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bench::backbone::{ModelConfig, ToyBackbone};
use crate::bench::dataset::{generate_dataset, SyntheticDatasetSpec};
use crate::bench::metrics::classwise_accuracy;
use crate::bench::strategies::{ExposureSchedule, RunSettings, Strategy, StrategyRunner};
use crate::checkpoint::Checkpoint;
use crate::data::Dataset;
use crate::error::{DdscError, Result};
use crate::schedule::ScheduleConfig;
use crate::stats::{mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub dataset: SyntheticDatasetSpec,
    pub schedule: ScheduleConfig,
    pub model: ModelConfig,
    pub exposure: ExposureSchedule,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    /// Keep an end-of-epoch checkpoint of every curriculum run.
    pub checkpoints: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            dataset: SyntheticDatasetSpec::default(),
            schedule: ScheduleConfig::default(),
            model: ModelConfig::default(),
            exposure: ExposureSchedule::default(),
            strategies: vec![Strategy::Uniform, Strategy::Ddsc],
            seeds: (0..20).collect(),
            checkpoints: false,
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.schedule.validate()?;
        if self.model.embedding_dim == 0 {
            return Err(DdscError::InvalidConfig { field: "embedding_dim", reason: "must be at least 1".into() });
        }
        if self.model.batch_size == 0 {
            return Err(DdscError::InvalidConfig { field: "batch_size", reason: "must be at least 1".into() });
        }
        if !(self.model.learning_rate > 0.0 && self.model.learning_rate.is_finite()) {
            return Err(DdscError::InvalidConfig { field: "learning_rate", reason: "must be positive".into() });
        }
        if self.strategies.is_empty() {
            return Err(DdscError::InvalidConfig { field: "strategies", reason: "need at least one".into() });
        }
        if self.seeds.is_empty() {
            return Err(DdscError::InvalidConfig { field: "seeds", reason: "need at least one".into() });
        }
        Ok(())
    }

    /// Dataset spec for one run seed.
    pub fn dataset_for_seed(&self, seed: u64) -> SyntheticDatasetSpec {
        SyntheticDatasetSpec {
            seed: self.dataset.seed.wrapping_add(seed.wrapping_mul(0x2545_F491_4F6C_DD1D)),
            ..self.dataset.clone()
        }
    }
}

/// One row of the learning-curve table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub epoch: usize,
    pub lambda: Option<f64>,
    pub train_loss: f64,
    pub acc_overall: f64,
    pub acc_seen: f64,
    pub acc_unseen: f64,
    pub weight_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub strategy: Strategy,
    pub seed: u64,
    /// Unweighted mean training loss of the freshly initialized model.
    pub initial_loss: f64,
    pub curves: Vec<CurveRow>,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunResult {
    pub fn last(&self) -> &CurveRow {
        self.curves.last().expect("at least one epoch")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        MeanStd { mean: mean(values), std: std_dev(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub runs: usize,
    pub acc_overall: MeanStd,
    pub acc_seen: MeanStd,
    pub acc_unseen: MeanStd,
    pub final_train_loss: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub runs: Vec<RunResult>,
    pub summaries: Vec<StrategySummary>,
}

impl BenchmarkReport {
    pub fn rows(&self) -> impl Iterator<Item = &CurveRow> {
        self.runs.iter().flat_map(|r| r.curves.iter())
    }

    pub fn summary(&self, strategy: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    /// Final-epoch accuracies of `strategy`, ordered by seed.
    pub fn final_accuracies(&self, strategy: Strategy) -> Vec<(f64, f64, f64)> {
        self.runs
            .iter()
            .filter(|r| r.strategy == strategy)
            .map(|r| {
                let last = r.last();
                (last.acc_overall, last.acc_seen, last.acc_unseen)
            })
            .collect()
    }

    /// Mean unseen-device accuracy of `a` minus that of `b`.
    pub fn unseen_delta(&self, a: Strategy, b: Strategy) -> Option<f64> {
        Some(self.summary(a)?.acc_unseen.mean - self.summary(b)?.acc_unseen.mean)
    }
}

/// Test-split accuracies: overall, seen devices, unseen devices.
pub fn evaluate(model: &ToyBackbone, test: &Dataset, spec: &SyntheticDatasetSpec) -> Result<(f64, f64, f64)> {
    let acc = |keep: &dyn Fn(usize) -> bool| -> Result<f64> {
        let (pred, truth): (Vec<usize>, Vec<usize>) =
            test.samples.iter().filter(|s| keep(s.device)).map(|s| (model.predict(&s.features), s.class)).unzip();
        classwise_accuracy(&pred, &truth, test.num_classes)
    };
    Ok((acc(&|_| true)?, acc(&|d| spec.is_seen_device(d))?, acc(&|d| !spec.is_seen_device(d))?))
}

/// Trains one model under one strategy.
pub fn run_single(config: &BenchmarkConfig, strategy: Strategy, seed: u64) -> Result<RunResult> {
    let spec = config.dataset_for_seed(seed);
    let (train, test) = generate_dataset(&spec)?;
    let mut model =
        ToyBackbone::new(spec.raw_dim, config.model.embedding_dim, spec.classes, config.model.learning_rate, seed);
    let initial_loss = train.samples.iter().map(|s| model.loss(s)).sum::<f64>() / train.len() as f64;
    let settings = RunSettings {
        schedule: config.schedule.clone(),
        exposure: config.exposure,
        batch_size: config.model.batch_size,
        seed,
    };
    let mut runner = StrategyRunner::new(strategy, &train, &model, &settings)?;
    let mut curves = Vec::with_capacity(config.schedule.epochs);
    let mut checkpoints = Vec::new();
    for epoch in 1..=config.schedule.epochs {
        let outcome = runner
            .run_epoch(&mut model, &train, epoch, &settings)
            .map_err(|e| DdscError::AtEpoch { epoch, source: Box::new(e) })?;
        let (acc_overall, acc_seen, acc_unseen) = evaluate(&model, &test, &spec)?;
        curves.push(CurveRow {
            strategy,
            seed,
            epoch,
            lambda: outcome.lambda,
            train_loss: outcome.train_loss,
            acc_overall,
            acc_seen,
            acc_unseen,
            weight_entropy: outcome.weight_entropy,
        });
        if config.checkpoints {
            if let Some(state) = runner.curriculum_state() {
                checkpoints.push(Checkpoint::new(strategy.name(), state.clone()));
            }
        }
    }
    Ok(RunResult { strategy, seed, initial_loss, curves, checkpoints })
}

/// Runs every (strategy, seed) pair, in parallel, and aggregates final-epoch
/// accuracies per strategy. Runs are ordered by strategy (as listed) then seed.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let jobs: Vec<(usize, Strategy, u64)> = config
        .strategies
        .iter()
        .enumerate()
        .flat_map(|(k, s)| config.seeds.iter().map(move |seed| (k, *s, *seed)))
        .collect();
    let mut runs: Vec<(usize, RunResult)> = jobs
        .par_iter()
        .map(|&(k, strategy, seed)| {
            run_single(config, strategy, seed).map(|r| (k, r)).map_err(|e| DdscError::InRun {
                strategy: strategy.name().into(),
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|(k, r)| (*k, r.seed));
    let runs: Vec<RunResult> = runs.into_iter().map(|(_, r)| r).collect();

    let mut summaries = Vec::new();
    for &strategy in &config.strategies {
        if summaries.iter().any(|s: &StrategySummary| s.strategy == strategy) {
            continue;
        }
        let lasts: Vec<&CurveRow> = runs.iter().filter(|r| r.strategy == strategy).map(|r| r.last()).collect();
        let pick = |f: fn(&CurveRow) -> f64| lasts.iter().map(|r| f(r)).collect::<Vec<_>>();
        summaries.push(StrategySummary {
            strategy,
            runs: lasts.len(),
            acc_overall: MeanStd::of(&pick(|r| r.acc_overall)),
            acc_seen: MeanStd::of(&pick(|r| r.acc_seen)),
            acc_unseen: MeanStd::of(&pick(|r| r.acc_unseen)),
            final_train_loss: MeanStd::of(&pick(|r| r.train_loss)),
        });
    }
    Ok(BenchmarkReport { runs, summaries })
}
