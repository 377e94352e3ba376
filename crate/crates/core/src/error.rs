use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DdscError {
    #[error("empty prototype bank")]
    EmptyPrototypeBank,
    #[error("invalid temperature: {0}")]
    InvalidTemperature(f64),
    #[error("entropy undefined for fewer than two devices (got {0})")]
    TooFewDevices(usize),
    #[error("degenerate prototype mean for device {0}")]
    DegeneratePrototypeMean(usize),
    #[error("zero-norm embedding")]
    ZeroNormEmbedding,
    #[error("embedding is not unit norm (norm = {0})")]
    NotUnitNorm(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss {loss} for sample {sample}")]
    NonFiniteLoss { sample: usize, loss: f64 },
    #[error("negative loss {loss} for sample {sample}")]
    NegativeLoss { sample: usize, loss: f64 },
    #[error("double finalize: epoch losses already finalized")]
    DoubleFinalize,
    #[error("empty ledger")]
    EmptyLedger,
    #[error("sample index {index} out of range for {len} samples")]
    SampleOutOfRange { index: usize, len: usize },
    #[error("epoch {epoch} out of range 1..={total}")]
    EpochOutOfRange { epoch: usize, total: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("batch weight mass is zero")]
    ZeroBatchMass,
    #[error("empty batch")]
    EmptyBatch,
    #[error("device label {device} out of range for {devices} devices (sample {sample})")]
    DeviceOutOfRange { sample: usize, device: usize, devices: usize },
    #[error("class label {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("undefined per-class accuracy: class {0} absent from truth")]
    UndefinedClassAccuracy(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid config: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("empty cell (class {class}, device {device}) after subsampling; increase samples per cell")]
    EmptyCell { class: usize, device: usize },
    #[error("epoch {epoch}: {source}")]
    AtEpoch { epoch: usize, source: Box<DdscError> },
    #[error("strategy {strategy}, seed {seed}: {source}")]
    InRun { strategy: String, seed: u64, source: Box<DdscError> },
    #[error("unreadable checkpoint: {0}")]
    UnreadableCheckpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for DdscError {
    fn from(err: std::io::Error) -> Self {
        DdscError::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DdscError>;
