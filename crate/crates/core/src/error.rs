use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("label index {index} out of range for window of {slots} slots")]
    LabelOutOfRange { index: usize, slots: usize },

    #[error("steady state not reached; final residual {residual:.3e}")]
    NotConverged { residual: f64 },

    #[error("population outside [0, 1] beyond tolerance: {0}")]
    NonPhysical(f64),

    #[error("Fock cutoff too small: top-level population {population:.3e} exceeds {limit:.1e}")]
    FockCutoff { population: f64, limit: f64 },

    #[error("kernel fit residual {residual:.3e} above threshold {threshold:.3e}")]
    FitResidual { residual: f64, threshold: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
