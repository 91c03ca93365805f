use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point index {index} (space has {len} points)")]
    InvalidPoint { index: usize, len: usize },

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("measures live on spaces of different sizes ({left} vs {right})")]
    SpaceMismatch { left: usize, right: usize },

    #[error("conditioning on a null cell (mass {mass:e})")]
    NullConditioning { mass: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// The non-negativity condition fails: `beta_star > eta` on the named cell.
    #[error("H measure for alpha {alpha} at level {level} is negative on cell {cell}: beta* = {beta_star} > eta = {eta}")]
    Negativity {
        alpha: usize,
        level: usize,
        cell: usize,
        beta_star: f64,
        eta: f64,
    },

    #[error("alpha {alpha} has not converged at level 1 (violated on cell {cell}: {reason})")]
    NotConverged {
        alpha: usize,
        cell: usize,
        reason: String,
    },

    #[error("event reads coordinate alpha {alpha}, which is outside the enumerated index set")]
    ContractViolation { alpha: usize },

    #[error("probe(s) sit on jumps of the limit CDF: {0:?}")]
    DiscontinuityProbe(Vec<f64>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPoint { .. } => "invalid_point",
            Error::InvalidMetric(_) => "invalid_metric",
            Error::InvalidMeasure(_) => "invalid_measure",
            Error::SpaceMismatch { .. } => "space_mismatch",
            Error::NullConditioning { .. } => "null_conditioning",
            Error::Domain(_) => "domain",
            Error::Negativity { .. } => "negativity",
            Error::NotConverged { .. } => "not_converged",
            Error::ContractViolation { .. } => "contract_violation",
            Error::DiscontinuityProbe(_) => "discontinuity_probe",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
