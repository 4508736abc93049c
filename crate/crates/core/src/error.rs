use thiserror::Error;

/// Toolkit-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("metric not positive definite at {point} (min eigenvalue {min_eigenvalue:.3e})")]
    DegenerateMetric { point: String, min_eigenvalue: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("velocity cap {cap} exceeded at t = {t} (speed {speed:.6})")]
    VelocityCap { t: f64, speed: f64, cap: f64 },

    #[error("out of domain: {0}")]
    Domain(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
