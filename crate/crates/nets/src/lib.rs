//! ReLU network building blocks, neural operator architectures and a small
//! training loop.

pub mod operator_nets;
pub mod relu_lib;
pub mod train;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("non-finite target value at x = {0}")]
    NonFinite(f64),
    #[error("tolerance {target:e} not reached, best sup error {best:e}")]
    Tolerance { target: f64, best: f64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("format: {0}")]
    Format(String),
}
