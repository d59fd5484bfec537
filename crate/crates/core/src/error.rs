use thiserror::Error;

use crate::layout::Segment;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: shape mismatch, left is {left:?}, right is {right:?}")]
    ShapeMismatch { op: &'static str, left: (usize, usize), right: (usize, usize) },

    #[error("matrix data length {len} does not match {rows}x{cols}")]
    BadMatrixData { rows: usize, cols: usize, len: usize },

    #[error("top-k: k={k} exceeds the {len} available scores")]
    TopKTooLarge { k: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bounding box {0:?} does not fit inside a {1}-pixel template")]
    BBoxOutOfBounds(crate::layout::BBox, usize),

    #[error("static-template center token (original index {0}) is no longer present")]
    CenterTokenMissing(usize),

    #[error("text token is absent from the batch")]
    TextTokenMissing,

    #[error("foreground bonus only applies to the static template, not {0}")]
    BonusOnWrongSegment(Segment),

    #[error("the text token is never pruned")]
    TextNotPrunable,

    #[error("duplicate original index {index} in segment {segment}")]
    DuplicateIndex { segment: Segment, index: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::InvalidConfig(err.to_string())
    }
}
