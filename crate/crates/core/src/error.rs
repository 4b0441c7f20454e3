use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed or unsupported PGM input. `offset` is the byte position
    /// where decoding stopped.
    #[error("pgm parse error at byte offset {offset}: {reason}")]
    Pgm { offset: usize, reason: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Adaptive quadrature failed to converge on `[a, b]`.
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },

    #[error("alpha undefined: diagonal affinity")]
    AlphaUndefined,

    #[error("instance too large: n = {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("divergence at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("zero norm: {0}")]
    ZeroNorm(String),

    #[error("malformed family string {input:?}: {reason}")]
    Family { input: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
