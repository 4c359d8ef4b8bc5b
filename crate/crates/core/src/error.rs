use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BudgetError {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("{what} must be strictly positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("noise factor must be >= 1, got {0}")]
    NoiseFactorBelowOne(f64),
    #[error("infeasible receiver budget: {0}")]
    Infeasible(String),
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("probability must lie in (0, 1), got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("a quantile at p = 0.5 carries no dispersion information")]
    MedianQuantile,
    #[error("quantile {value} at p = {prob} is on the wrong side of the mean {mean}")]
    SignInconsistent { mean: f64, value: f64, prob: f64 },
    #[error("no quantile constraints given")]
    NoConstraints,
    #[error("invalid variability model: {0}")]
    InvalidModel(String),
    #[error("population is empty")]
    EmptyPopulation,
    #[error("population size must be >= 1")]
    ZeroSize,
    #[error("calibration: {0}")]
    Calibration(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("control bits (phi = {phi}, phi_g = {phi_g}) do not select a PLNA mode")]
    InvalidControlBits { phi: bool, phi_g: bool },
    #[error("device width w1 must be > 0")]
    NonPositiveWidth,
    #[error("{0}")]
    Invalid(String),
    #[error("unknown design '{0}'")]
    UnknownDesign(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
    #[error("unsupported schema_version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("population carries {found} modes per die, design defines {expected}")]
    ModeCountMismatch { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("comparison is not like-for-like: {0}")]
    Mismatch(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Crate-level error; the prefix names the module that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("budget: {0}")]
    Budget(#[from] BudgetError),
    #[error("statmodel: {0}")]
    Stat(#[from] StatError),
    #[error("designs: {0}")]
    Design(#[from] DesignError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("selection: {0}")]
    Selection(#[from] SelectionError),
    #[error("report: {0}")]
    Report(#[from] ReportError),
}

impl Error {
    /// True for errors caused by bad input data rather than by the run itself.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Report(ReportError::Io { .. }))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
