use thiserror::Error;

/// Errors surfaced by the spectral, sampling, and dynamics layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("band-limit violation: {0}")]
    BandLimit(String),
    #[error("dealiasing guarantee exceeded: {0}")]
    Dealiasing(String),
    #[error("time {t} outside the sampled window [0, {max}]")]
    TimeWindow { t: f64, max: f64 },
    #[error("non-Hermitian coefficients: {0}")]
    NonHermitian(String),
    #[error("inadmissible exponent pair: {0}")]
    Inadmissible(String),
    #[error("degenerate fit window: {0}")]
    DegenerateWindow(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("snapshot format: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
