use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::trainer::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A point lies outside the domain of a potential or activation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric error: {message} (residual {residual:e})")]
    Numeric { message: String, residual: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// A potential / constraint pairing for which no Bregman projection is provided.
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("internal error: {0}")]
    Internal(String),

    /// Training aborted; the trace recorded up to the failing iteration is attached.
    #[error("training diverged at iteration {}: {}", .0.iteration, .0.reason)]
    Diverged(Box<Divergence>),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone)]
pub struct Divergence {
    pub iteration: usize,
    pub reason: String,
    pub partial: PartialTrace,
}

#[derive(Debug, Clone)]
pub enum PartialTrace {
    Vector(TrainTrace<DVector<f64>>),
    Matrix(TrainTrace<DMatrix<f64>>),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
