use thiserror::Error;

/// Errors raised by the simulator and the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too narrow: {0}")]
    GridTooNarrow(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("state is not normalized (norm² = {0})")]
    NotNormalized(f64),
    #[error("detector lattice does not cover the run: {0}")]
    Coverage(String),
    #[error("time step too large: total jump probability {0} per step")]
    TimestepTooLarge(f64),
    #[error("wavefunction leaked to the grid boundary (mass {0:e})")]
    BoundaryLeak(f64),
    #[error("master-equation integration unstable: {0}")]
    StepUnstable(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("config hash mismatch: {0}")]
    HashMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Machine-readable category, used for CLI exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::GridTooNarrow(_) | Error::GridTooCoarse(_) | Error::Coverage(_) => "config",
            Error::NotNormalized(_)
            | Error::TimestepTooLarge(_)
            | Error::BoundaryLeak(_)
            | Error::StepUnstable(_) => "simulation",
            Error::InsufficientData(_) => "data",
            Error::Format(_) | Error::HashMismatch(_) => "input",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
