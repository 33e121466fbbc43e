use thiserror::Error;

/// Errors raised by the geometry engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A primitive (division, square root, logarithm, real power) was
    /// evaluated outside its smooth domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A multi-index asked for a partial the jet does not carry.
    #[error("multi-index {index} exceeds stored order (total {order}, x-block {x_order})")]
    Index {
        index: String,
        order: u8,
        x_order: u8,
    },

    /// The fundamental tensor is not positive-definite at the support element.
    #[error("fundamental tensor not positive-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NonPositiveDefinite { min_eigenvalue: f64 },

    #[error("parse error at byte {offset}: expected one of {expected:?}")]
    Parse { offset: usize, expected: Vec<String> },

    #[error("invalid medium: {0}")]
    Spec(String),

    #[error("degenerate seed basis: every seed is parallel to the supporting element")]
    DegenerateSeed,

    /// Δ or Σ vanishes (within tolerance) so the spin foliation is undefined.
    #[error("singular locus: Delta = {delta:e}, Sigma = {sigma:e}")]
    SingularLocus { delta: f64, sigma: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory grids do not match: {0}")]
    GridMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
