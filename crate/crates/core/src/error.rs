use thiserror::Error;

/// Errors raised by grid construction, transforms, solvers and probes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("domain: {0}")]
    Domain(String),
    #[error("incompatible: {0}")]
    Incompatible(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("wrap ambiguity: kernel mass {mass:.3e} near the anti-diagonal cut exceeds {limit:.1e}")]
    WrapAmbiguity { mass: f64, limit: f64 },
    #[error("not positive: eigenvalue {value:.6e} below -{tolerance:.1e} * {scale:.6e}")]
    NotPositive { value: f64, tolerance: f64, scale: f64 },
    #[error("not hermitian: max |K - K^*| = {0:.3e}")]
    NotHermitian(f64),
    #[error("support escape: momentum-boundary mass {mass:.3e} exceeds {limit:.1e} at t = {time:.4}")]
    SupportEscape { mass: f64, limit: f64, time: f64 },
    #[error("field history: {0}")]
    FieldHistory(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
