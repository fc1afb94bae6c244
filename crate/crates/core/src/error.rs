use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} component {index} = {value} lies outside [{lower}, {upper}]")]
    OutsideBox {
        what: &'static str,
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value {value} at node {node} ({context})")]
    NonFinite {
        node: usize,
        value: f64,
        context: String,
    },

    #[error("union of zero shapes has no implicit function")]
    EmptyUnion,

    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },

    #[error("segment {segment} out of range (flight plan has {count} segments)")]
    SegmentOutOfRange { segment: usize, count: usize },

    #[error("along-track position {s} outside segment {segment} of length {length}")]
    OutsideSegment { segment: usize, s: f64, length: f64 },

    #[error("no recorded field covers time {time} (tube spans [{start}, {end}])")]
    TimeCoverage { time: f64, start: f64, end: f64 },

    #[error("recorded times of the two tubes do not match")]
    TimeMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::CflViolation { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
