use alloc::string::String;
use core::fmt;

/// Errors raised by the detection pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument violated an operation's precondition.
    InvalidArgument(String),
    /// A feature vector did not match the lattice dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// An operation that needs data was handed an empty set.
    EmptyData(&'static str),
    /// Label calibration needs both door and non-door examples.
    SingleClass,
    /// Training found no candidate overlapping a ground-truth door.
    NoPositiveCandidates { images: usize, candidates: usize },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::EmptyData(what) => write!(f, "empty data: {what}"),
            Error::SingleClass => {
                write!(f, "calibration set must contain both door and non-door vectors")
            }
            Error::NoPositiveCandidates { images, candidates } => write!(
                f,
                "no positive candidates: {candidates} candidates from {images} images, none overlap a door"
            ),
        }
    }
}

impl core::error::Error for Error {}
