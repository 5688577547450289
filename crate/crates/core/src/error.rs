use thiserror::Error;

use crate::fgraph::VarKey;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The robot description could not be read (bad XML, missing tags or attributes).
    #[error("malformed description: {0}")]
    MalformedDescription(String),

    #[error("invalid inertia for link `{link}`: {reason}")]
    InvalidInertia { link: String, reason: String },

    /// Structural problem in the link/joint graph.
    #[error("graph error: {0}")]
    GraphError(String),

    /// The stacked blocks for a variable do not have full column rank.
    #[error("rank deficient system at variable {0}")]
    RankDeficient(VarKey),

    #[error("inconsistent loop state at joint `{joint}`: residual {residual:.3e}")]
    InconsistentLoopState { joint: String, residual: f64 },

    #[error("ordering scheme {scheme} is incompatible with the problem: {reason}")]
    IncompatibleScheme { scheme: String, reason: String },

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("singular mass matrix")]
    SingularMass,

    /// Ordering is not a permutation of the graph variables.
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    /// Joint state or problem specification does not match the model.
    #[error("invalid input: {0}")]
    InvalidInput(String),
}
