use std::io;

use thiserror::Error;

/// Errors raised by the navigation core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate displacement sample {index}: world displacement {rd_cm:e} cm")]
    DegenerateSample { index: usize, rd_cm: f64 },

    #[error("too few dots detected: found {found}, need {needed}")]
    TooFewDots { found: usize, needed: usize },

    #[error("ill-conditioned fit (condition number {0:e})")]
    IllConditioned(f64),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("insufficient edges for a model: {length:.1} px of edge, {edgels} edgels")]
    InsufficientEdges { length: f64, edgels: usize },

    #[error("fit error needs at least one common pair")]
    EmptyPairs,

    #[error("registration is not finalized")]
    Unregistered,

    #[error("marker does not fit inside the frame")]
    OutOfFrame,

    #[error("nothing to report: no frames processed")]
    EmptyReport,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}
