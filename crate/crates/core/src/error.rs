use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("resolution too coarse: {0}")]
    Resolution(String),
    #[error("interior is not connected ({components} components)")]
    Disconnected { components: usize },
    #[error("nested holes: an interior island sits inside a hole")]
    NestedHoles,
    #[error("component index {k} out of range (domain has {n} components)")]
    Component { k: usize, n: usize },
    #[error("{method} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("parameter is resonant with eigenvalue {eigenvalue:.6}: {what}")]
    Resonant { what: String, eigenvalue: f64 },
    #[error("bracket failure: {0}")]
    Bracket(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
