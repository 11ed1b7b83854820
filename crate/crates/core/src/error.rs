use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("backend {backend} requires uniform density")]
    NonUniformDensity { backend: &'static str },
    #[error("backend {backend} unavailable: {reason}")]
    BackendUnavailable { backend: &'static str, reason: String },
    #[error("kernel entries unavailable for backend {0}")]
    EntriesUnavailable(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target volume {target:e} of phase {phase} is below the smallest vertex mass {min_mass:e}")]
    TargetTooSmall { phase: usize, target: f64, min_mass: f64 },
    #[error("multiplier solve did not converge after {cycles} cycles (residual {residual:e})")]
    MultiplierNotConverged { cycles: usize, residual: f64 },
    #[error("variational solve did not converge after {iterations} iterations (duality gap {gap:e})")]
    VariationalNotConverged {
        iterations: usize,
        gap: f64,
        best: Box<crate::mbo::VariationalIterate>,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
