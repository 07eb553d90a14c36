use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh parameter h = {h} under-resolves a domain of extent {extent}")]
    UnderResolved { h: f64, extent: f64 },

    #[error("polygon boundary is not simple: {0}")]
    NotSimple(String),

    #[error("geodesic ball of radius {radius} at vertex {center} is not a topological disk: {reason}")]
    BallNotDisk {
        center: usize,
        radius: f64,
        reason: String,
    },

    #[error("surgery rejected: {0}")]
    Surgery(String),

    #[error("operation needs an embedded mesh (coordinates and ambient chart)")]
    NotEmbedded,

    #[error("assembly failed: {0}")]
    Assembly(String),

    #[error("matrix is not positive definite at pivot {0}")]
    NotPositiveDefinite(usize),

    #[error("eigensolver did not converge after {iterations} iterations (best relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("problem size {size} exceeds the dense oracle cap {cap}")]
    TooLarge { size: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("nodal analysis: {0}")]
    Nodal(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
