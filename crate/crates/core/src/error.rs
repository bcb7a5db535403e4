use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not Hermitian (anti-Hermitian part {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semi-definite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("operator trace {0} is not 1")]
    NotNormalized(f64),

    #[error("non-finite matrix entry")]
    NonFinite,

    #[error("{name} = {value} is out of range {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("Bloch vector has norm {0}, expected 1")]
    NonUnitBloch(f64),

    #[error("filter annihilates the state (success probability {0:.3e})")]
    ZeroNormalization(f64),

    #[error("invalid state file: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
