use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("Hilbert-space dimension {dimension} exceeds the oracle cap {cap}")]
    DimensionCap { dimension: usize, cap: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("ground state is degenerate (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("level {level} is degenerate with another level")]
    DegenerateLevel { level: usize },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("topology is disconnected: no path between physical qubits {from} and {to}")]
    DisconnectedTopology { from: usize, to: usize },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid Trotter schedule: {0}")]
    InvalidSchedule(String),

    #[error("time {time} lies beyond the last schedule bucket ({limit})")]
    BeyondSchedule { time: f64, limit: f64 },

    #[error("estimator requires a field-polarized product ground state: {0}")]
    NonProductGroundState(String),

    #[error("missing reference series: {0}")]
    MissingReference(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("time grid too short to resolve {requested} frequencies (at most {resolvable})")]
    InsufficientResolution { requested: usize, resolvable: usize },

    #[error("fit needs at least {required} data values, got {available}")]
    TooFewPoints { required: usize, available: usize },

    #[error("rank-deficient design matrix in least squares")]
    RankDeficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown form factor ion '{0}'")]
    UnknownIon(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user input (configuration, input files).
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::InvalidSystem(_)
                | Error::InvalidTopology(_)
                | Error::InvalidNoise(_)
                | Error::InvalidSchedule(_)
                | Error::InvalidGrid(_)
                | Error::UnknownIon(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
