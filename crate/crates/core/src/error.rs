use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("bank {bank}: external liability must be positive, got {value}")]
    NonPositiveExternal { bank: usize, value: f64 },
    #[error("bank {bank}: initial liquid assets must be positive, got {value}")]
    NonPositiveLiquid { bank: usize, value: f64 },
    #[error("negative or non-finite entry in {what} at {index:?}: {value}")]
    NegativeEntry {
        what: &'static str,
        index: (usize, usize),
        value: f64,
    },
    #[error("nonzero self-liability for bank {bank}: {value}")]
    NonzeroDiagonal { bank: usize, value: f64 },
    #[error("network must contain at least one bank")]
    Empty,
    #[error("invalid inverse demand: {0}")]
    InverseDemand(String),
    #[error("liquidation amount {x} outside the demand domain [0, {bound}]")]
    OutOfDomain { x: f64, bound: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClearingError {
    #[error("clearing did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid asset vector: {0}")]
    InvalidAssets(String),
    #[error("bank index {index} out of range for a {n}-bank network")]
    BankIndex { index: usize, n: usize },
    #[error("solvency threshold {0} is not positive")]
    NonPositiveThreshold(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShockError {
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("factor is not lower triangular with positive diagonal (row {row})")]
    NotLowerTriangular { row: usize },
    #[error("correlation matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("row {row} of the correlation factor has norm {norm}, expected 1")]
    RowNorm { row: usize, norm: f64 },
    #[error("volatility for bank {bank} must be positive, got {value}")]
    NonPositiveVolatility { bank: usize, value: f64 },
    #[error("regime multiplier must be positive, got {0}")]
    Multiplier(f64),
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("record {index} ({name}): {reason}")]
    InvalidRecord {
        index: usize,
        name: String,
        reason: String,
    },
    #[error("external liability ratio alpha = {0} is outside (0, 1)")]
    Alpha(f64),
    #[error("beta = {0} is outside (0, 1]")]
    Beta(f64),
    #[error("Merton volatility solve failed in bracket [{lo}, {hi}]")]
    Merton { lo: f64, hi: f64 },
    #[error("marginal totals disagree: rows sum to {rows}, columns to {cols}")]
    Marginals { rows: f64, cols: f64 },
    #[error("infeasible support: {0}")]
    Infeasible(String),
    #[error("matrix balancing did not converge after {sweeps} sweeps (error {error:e})")]
    NoConvergence { sweeps: usize, error: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Shock(#[from] ShockError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("trial {trial}: {source}")]
    Clearing {
        trial: usize,
        #[source]
        source: ClearingError,
    },
    #[error("trial {trial}: non-finite weighted payoff {value} (z = {z:?})")]
    NonFinite { trial: usize, value: f64, z: Vec<f64> },
    #[error("tilt vector has length {found}, expected {expected}")]
    TiltLength { expected: usize, found: usize },
    #[error("empty trial batch")]
    EmptyBatch,
    #[error("batches are not paired: {0}")]
    Unpaired(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Solver(#[from] ClearingError),
}

/// Error from reading one of the text input formats.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{source_name}:{line}:{column}: {message}")]
pub struct ParseError {
    pub source_name: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(source_name: impl Into<String>, line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            source_name: source_name.into(),
            line,
            column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Clearing(#[from] ClearingError),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Config(String),
}
