//! Dynamic dual-signal curriculum.
//!
//! Online per-example reweighting for training under device-induced domain
//! shift. Two signals are computed for every sample after each epoch:
//!
//! - an invariance score, the normalized entropy of a cosine posterior over
//!   EMA-tracked device prototypes ([`invariance`]);
//! - a learning-progress score, the EMA of the absolute epoch-to-epoch loss
//!   change, min-max normalized ([`progress`]).
//!
//! A cosine-decayed coefficient mixes them, invariance first and progress
//! later, and a softmax turns the mixed scores into weights for the next
//! epoch ([`schedule`], [`engine`]).
//!
//! [`bench`] holds a synthetic multi-device benchmark with a small neural
//! backbone and baseline strategies.

pub mod bench;
pub mod checkpoint;
pub mod data;
pub mod engine;
pub mod error;
pub mod fake;
pub mod invariance;
pub mod progress;
pub mod schedule;
pub mod stats;

pub use data::{Dataset, Sample};
pub use engine::{run_training, CurriculumState, EpochReport, Trainer};
pub use error::{DdscError, Result};
pub use invariance::{PrototypeBank, UnitEmbedding};
pub use progress::SampleLedger;
pub use schedule::ScheduleConfig;
