use std::io;
use std::path::PathBuf;

use thiserror::Error;

use eimvr::estimator::EstimatorError;
use eimvr::microstructure::MicrostructureError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot parse {path}: {source}")]
    ConfigParse { path: PathBuf, source: toml::de::Error },
    #[error(transparent)]
    Microstructure(#[from] MicrostructureError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error("{failed} of {attempted} {kind} solves failed, above the 5% failure budget")]
    FailureBudget { kind: &'static str, failed: usize, attempted: usize },
    #[error("existing output in {dir} does not belong to this run: {reason}")]
    Mismatch { dir: PathBuf, reason: String },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("only {0} successful paired realizations; at least 2 are needed")]
    TooFewPairs(usize),
    #[error("cannot build thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| CliError::Io { path: path.into(), source })
    }
}
