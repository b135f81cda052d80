use thiserror::Error;

/// Errors raised across the simulator, network compiler and training stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gate {0} is not Gaussian and has no affine phase-space action")]
    NonGaussianGate(&'static str),
    #[error("mode index {mode} out of range for {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },
    #[error("generator block {block} does not commute with the cyclic shift (residual {residual:.3e})")]
    NotTranslationInvariant { block: &'static str, residual: f64 },
    #[error("cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },
    #[error("state has zero trace")]
    ZeroTrace,
    #[error("projection probability {0:.3e} below threshold")]
    ZeroProbability(f64),
    #[error("operation requires a pure state")]
    MixedStateUnsupported,
    #[error("weight matrix is rank deficient (condition number {0:.3e})")]
    RankDeficient(f64),
    #[error("weight matrix is {rows}x{cols}, expected square")]
    NonSquare { rows: usize, cols: usize },
    #[error("recurrent unroll needs at least one step")]
    StepCountZero,
    #[error("classical output has {got} values, quantum input layer expects {expected}")]
    ParameterCountMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("cost is not finite ({0})")]
    NonFiniteCost(f64),
    #[error("training diverged at step {step} (cost {cost})")]
    DivergedCost { step: usize, cost: f64, last_finite: Vec<f64> },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("checkpoint schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint checksum mismatch")]
    CorruptCheckpoint,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
