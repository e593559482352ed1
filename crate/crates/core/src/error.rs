use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed meta.json: {0}")]
    MalformedMeta(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("direction {index} is not a unit vector (norm {norm})")]
    NonUnitDirection { index: usize, norm: f64 },
    #[error("duplicate directions {0} and {1}")]
    DuplicateDirection(usize, usize),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("empty signal")]
    EmptySignal,
    #[error("signal has zero energy")]
    ZeroEnergySignal,
    #[error("shift {shift} exceeds half the signal length {len}")]
    ShiftTooLarge { shift: f64, len: usize },
    #[error("fft size {fft_size} is smaller than the signal length {len}")]
    BadFftSize { fft_size: usize, len: usize },

    #[error("degenerate hull input: {0}")]
    DegenerateInput(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("graph already has a delta vertex")]
    DeltaAlreadyPresent,

    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("cycle set is insufficient: {0}")]
    MissingCycles(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("correlation peaks required for CORR weighting")]
    MissingPeaks,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rank deficient SH system: {rows} directions for {cols} coefficients")]
    RankDeficient { rows: usize, cols: usize },
    #[error("frequency band contains no bins")]
    EmptyBand,
}

pub type Result<T> = std::result::Result<T, Error>;
