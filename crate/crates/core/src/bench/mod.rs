//! Desk-scale benchmark: synthetic multi-device data, a small neural
//! backbone, baseline weighting strategies and class-wise accuracy.

pub mod backbone;
pub mod benchmark;
pub mod dataset;
pub mod metrics;
pub mod report;
pub mod strategies;

pub use backbone::{ModelConfig, ToyBackbone};
pub use benchmark::{run_benchmark, run_single, BenchmarkConfig, BenchmarkReport, CurveRow, StrategySummary};
pub use dataset::{generate_dataset, SyntheticDatasetSpec};
pub use metrics::classwise_accuracy;
pub use strategies::{static_entropy_weights, ExposureSchedule, StaticEntropyPlan, Strategy};
