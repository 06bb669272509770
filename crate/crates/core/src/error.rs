use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A quadrature or factorisation did not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// The graph violates a structural requirement.
    #[error("invalid graph: {0}")]
    Graph(String),
    /// Full enumeration was refused because the set is larger than the cap.
    #[error("{count} patterns exceed the enumeration cap of {cap}; sample instead")]
    TooLarge { count: u128, cap: u128 },
    /// A memory or work guard was tripped.
    #[error("resource guard: {0}")]
    Resource(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
