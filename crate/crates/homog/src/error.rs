use thiserror::Error;

/// Errors produced by the numerical toolkit.
#[derive(Debug, Error)]
pub enum HomogError {
    /// The discrete Legendre transform found its maximizer on the primal
    /// boundary for a dual point in the interior of the requested range, so
    /// the tabulated supremum is not trustworthy there.
    #[error("dual grid saturation: maximizer on primal boundary at dual point {dual_point:?} (primal radius {primal_radius})")]
    BoundarySaturation { dual_point: Vec<f64>, primal_radius: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("bracket expansion failed after {doublings} doublings (modular at lambda={lambda} is {modular})")]
    BracketExpansion { doublings: usize, lambda: f64, modular: f64 },

    #[error("solver did not converge: residual {residual} after {iterations} iterations (tol {tol})")]
    NonConvergence { residual: f64, iterations: usize, tol: f64 },

    #[error("dual range exceeded: requested point {point:?} outside tabulated radius {radius}")]
    DualRange { point: Vec<f64>, radius: f64 },

    #[error("epsilon {eps} is not aligned with the grid: {reason}")]
    Misaligned { eps: f64, reason: String },

    #[error("unknown family: {0}")]
    UnknownFamily(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HomogError>;
