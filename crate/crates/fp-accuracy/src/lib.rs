//! Floating-point accuracy improvement: FPCore front end, sampling,
//! high-precision ground truth, local error and the improvement pipeline.

pub mod fpcore;
pub mod improve;
pub mod real;
pub mod sample;
pub mod truth;
pub mod ulp;

pub use fpcore::{parse_fpcore, FPCore};
pub use improve::{default_rules, improve, AccuracyReport, ImproveConfig, Improved};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FpError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported operator or feature: {0}")]
    Unsupported(String),
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("{stage} failed: {msg}")]
    Stage { stage: &'static str, msg: String },
}
