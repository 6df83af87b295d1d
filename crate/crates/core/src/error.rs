use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("zero riders: a world needs at least one rider")]
    NoRiders,
    #[error("empty run: horizon is 0")]
    EmptyRun,
    #[error("cannot step past horizon {horizon}")]
    PastHorizon { horizon: u32 },
    #[error("empty zone list")]
    NoZones,
    #[error("{0}")]
    Domain(String),
    #[error("equality undefined for N<2")]
    EqualityUndefined,
    #[error("involution index undefined for non-positive average utility ({0})")]
    InvolutionUndefined(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("rank-deficient design: collinear columns {0:?}")]
    RankDeficient(Vec<String>),
    #[error("constant column: {0}")]
    ConstantColumn(String),
    #[error("io: {0}")]
    Io(String),
    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
