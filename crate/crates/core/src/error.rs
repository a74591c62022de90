//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("network is disconnected under the given parameters")]
    DisconnectedNetwork,

    #[error("power flow failed at timestamp {t}: {source}")]
    ScenarioFailure {
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("measurement impossible under the noise model: {0}")]
    ImpossibleMeasurement(String),

    #[error(
        "degenerate solution: the output column does not participate in the null direction"
    )]
    DegenerateOutputColumn,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no cluster has finite posterior mass at timestamp {t}")]
    AllClustersImpossible { t: usize },

    #[error("all clusters are starved of responsibility mass")]
    AllClustersEmpty,

    #[error("parse error at row {row}: {message}")]
    CsvRow { row: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Distinguishes malformed inputs (configs, files, dimensions) from
    /// numerical failures; the CLI maps the two classes to different exit
    /// codes.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidInput(_)
                | Error::InvalidConfig(_)
                | Error::CsvRow { .. }
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
