//! Crate-wide error type.

use thiserror::Error;

/// Coarse classification used by callers to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or missing input data.
    Input,
    /// Numerical failure: degenerate data, non-convergence, undefined statistic.
    Numeric,
    /// Filesystem failure.
    Io,
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("unknown criterion {found:?}; expected one of {expected}")]
    UnknownCriterion { found: String, expected: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("file {path} is {size} bytes, over the 2 GiB reader limit; split it or stream per-setting shards")]
    FileTooLarge { path: String, size: u64 },

    #[error("underdetermined system: {rows} rows for {cols} design columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("degenerate target: zero variance, R^2 undefined")]
    DegenerateTarget,

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("no factor signal: all weights are zero")]
    NoFactorSignal,

    #[error("no observation variance for factor {factor}")]
    NoObservationVariance { factor: String },

    #[error("unreliable trait {factor}: mean within-factor correlation is not positive ({value})")]
    UnreliableTrait { factor: String, value: f64 },

    #[error("comparison graph is disconnected; components: {components:?}")]
    DisconnectedGraph { components: Vec<Vec<String>> },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("{failed} of {total} bootstrap iterations failed (limit 10%); gather more data")]
    BootstrapFailures { failed: usize, total: usize },

    #[error("insufficient models for collapse regression: {models} models, need at least {required}")]
    InsufficientModels { models: usize, required: usize },

    #[error("{stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<AuditError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl AuditError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            AuditError::MalformedRow { .. }
            | AuditError::UnknownCriterion { .. }
            | AuditError::InvalidInput(_)
            | AuditError::FileTooLarge { .. }
            | AuditError::Json(_)
            | AuditError::Csv(_) => ErrorKind::Input,
            AuditError::Io(_) => ErrorKind::Io,
            AuditError::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Numeric,
        }
    }

    /// Wrap an error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> AuditError {
        AuditError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;
