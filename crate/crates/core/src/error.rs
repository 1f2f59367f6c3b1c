use thiserror::Error;

/// Errors raised by the simulation engines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported Hamiltonian: {0}")]
    UnsupportedHamiltonian(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("corrupted state: {0}")]
    CorruptedState(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{what} exceeds the resource cap: needs about {required_bytes} bytes")]
    Resource { what: String, required_bytes: u128 },

    #[error("sector violation: {0}")]
    SectorViolation(String),

    #[error("quadrature did not converge: achieved error bound {achieved:e} > {requested:e}")]
    QuadratureNotConverged { achieved: f64, requested: f64 },

    #[error("Krylov propagation failed: {0}")]
    Krylov(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("trajectory {index}: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by exceeding memory or size caps.
    pub fn is_resource(&self) -> bool {
        match self {
            Error::Resource { .. } => true,
            Error::Trajectory { source, .. } => source.is_resource(),
            _ => false,
        }
    }

    /// True for errors that signal invalid user input rather than a numerical failure.
    pub fn is_config(&self) -> bool {
        match self {
            Error::InvalidSpec(_) | Error::Domain(_) | Error::SectorViolation(_) => true,
            Error::UnsupportedHamiltonian(_) | Error::DimensionMismatch { .. } => true,
            Error::Trajectory { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
