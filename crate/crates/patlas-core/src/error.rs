//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Variants are
//! grouped so that callers (notably the CLI) can distinguish problems with the
//! input data from problems that arise while training or scoring models.

use thiserror::Error;

/// Coarse classification of an error, used by callers to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed, inconsistent, or unresolvable input artifacts.
    Data,
    /// Failures while training, predicting, or evaluating a model.
    Evaluation,
}

/// Errors produced by graph construction, detection, and model code.
#[derive(Debug, Error)]
pub enum Error {
    /// Source text could not be parsed. Carries the offending file and line.
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u32,
        message: String,
    },

    /// A structural problem while assembling or validating a graph, such as a
    /// duplicate type name or an inheritance cycle.
    #[error("graph ingestion: {0}")]
    Ingest(String),

    /// A serialized artifact violated its schema.
    #[error("schema: {0}")]
    Schema(String),

    /// The ground-truth label file is malformed.
    #[error("labels: {0}")]
    Label(String),

    /// Role registry misuse or a corrupt registry file.
    #[error("role registry: {0}")]
    Registry(String),

    /// Feature map normalization or rendering failed.
    #[error("feature map: {0}")]
    FeatureMap(String),

    /// Dataset assembly failed, for example because no positive example
    /// survived candidate matching.
    #[error("dataset: {0}")]
    Dataset(String),

    /// Fold construction failed, for example with fewer than two projects.
    #[error("fold split: {0}")]
    Split(String),

    /// Model training failed.
    #[error("training: {0}")]
    Train(String),

    /// Prediction failed, for example due to a dimension mismatch.
    #[error("prediction: {0}")]
    Predict(String),

    /// A metric was asked to operate outside its domain.
    #[error("metrics: {0}")]
    Metric(String),

    /// Hyperparameter search failed before any trial could be scored.
    #[error("search: {0}")]
    Search(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Which broad class this error belongs to.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Train(_) | Error::Predict(_) | Error::Metric(_) | Error::Search(_) => {
                ErrorClass::Evaluation
            }
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
