use thiserror::Error;

/// Errors raised by the cone, quadrature, inequality and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gamma = {gamma} lies outside the admissible interval [1/2, 3/2]")]
    GammaOutOfRange { gamma: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("expected a unit vector, got norm {norm}")]
    NotUnit { norm: f64 },

    #[error("invalid parabola cone: {0}")]
    InvalidCone(String),

    #[error("t = {t} lies beyond t_bar = {t_bar}; p_t is negative somewhere on the sphere")]
    BeyondTBar { t: f64, t_bar: f64 },

    #[error("t = {t} must lie in the open interval (0, {t_bar})")]
    NotInterior { t: f64, t_bar: f64 },

    #[error("negative argument: {0}")]
    Negative(String),

    #[error("unsupported sphere dimension d = {d}; supported range is 1..=5")]
    UnsupportedSphere { d: usize },

    #[error("unsupported grid dimension d = {d}; supported range is 1..=3")]
    UnsupportedGrid { d: usize },

    #[error("invalid quadrature level {level}; level must be at least 4")]
    InvalidLevel { level: usize },

    #[error("evaluation failed at quadrature node {index}: {message}")]
    NodeEvaluation { index: usize, message: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("the Green identity is vacuous at gamma = 1 (2 - beta = 0)")]
    VacuousGreenIdentity,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error stems from the caller's input rather than a computation.
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::BeyondTBar { .. } | Error::NotInterior { .. } | Error::NodeEvaluation { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
