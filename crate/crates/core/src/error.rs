use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration that cannot be simulated faithfully.
    #[error("configuration error: {0}")]
    Config(String),

    /// Quadrature non-convergence, aliasing guard trips and similar.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A covariance matrix or measurement model that violates physics.
    #[error("physicality violation: {0}")]
    Physicality(String),

    /// Stored or computed data violating a declared invariant.
    #[error("data integrity error: {0}")]
    Integrity(String),

    /// Malformed ensemble or screen file.
    #[error("format error: {0}")]
    Format(String),

    #[error("realization {index}: {source}")]
    Realization {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerics or physics rather than by input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical(_) | Error::Physicality(_) | Error::Integrity(_) => true,
            Error::Realization { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
