use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter record violates its invariants.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient data: need at least {needed} increments, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// The data cannot support inference at all (e.g. every increment is zero).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// The data are fine but the corrected posterior is not usable
    /// (temperature below floor, nonpositive center).
    #[error("degenerate inference: {0}")]
    DegenerateInference(String),

    #[error("numeric failure in {routine}: {detail}")]
    Numeric { routine: &'static str, detail: String },

    /// A caller-supplied object broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for the failures a Monte Carlo replication records as a
    /// degenerate outcome instead of aborting the run.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateData(_) | Error::DegenerateInference(_))
    }
}
