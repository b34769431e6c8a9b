use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("invalid subcurve: {0}")]
    InvalidSubcurve(String),

    #[error("invalid rational {input:?}: {reason}")]
    InvalidRational { input: String, reason: String },

    #[error("invalid polarization: {0}")]
    InvalidPolarization(String),

    #[error("multidegree is not ample: component {vertex} has degree {degree}")]
    NonAmpleMultidegree { vertex: u32, degree: i64 },

    #[error("canonical polarization undefined: {0}")]
    CanonicalUndefined(String),

    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid sheaf datum: {0}")]
    InvalidSheaf(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unknown vertex id {0}")]
    UnknownVertex(u32),

    #[error("path identity violated: {0}")]
    PathIdentity(String),

    #[error("input format: {0}")]
    Format(String),
}
