use thiserror::Error;

/// Errors surfaced by measure construction, simulation and inversion routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid base measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid process specification: {0}")]
    InvalidSpec(String),

    #[error("kernel queried outside its tabulated domain: t={t}, x={x}")]
    OutOfDomain { t: f64, x: f64 },

    #[error("functional is not integrable against the kernel derivative: {0}")]
    NonIntegrableFunctional(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature tolerance not met: achieved {achieved:.3e}, target {target:.3e}")]
    ToleranceNotMet { achieved: f64, target: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate jump path: {0}")]
    DegeneratePath(String),

    #[error("observation not supported by the base measure: {0}")]
    UnsupportedObservation(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
