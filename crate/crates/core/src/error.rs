use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("n*d must be even for a d-regular graph (n={n}, d={d})")]
    Parity { n: usize, d: usize },
    #[error("degree must satisfy {min} <= d < n (n={n}, d={d})")]
    DegreeRange { n: usize, d: usize, min: usize },
    #[error("no simple pairing found after {attempts} attempts")]
    RejectionBudget { attempts: usize },
    #[error("vertex {v} out of range for n={n}")]
    VertexOutOfRange { v: usize, n: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("repeated edge {0}-{1}")]
    RepeatedEdge(usize, usize),
    #[error("vertex {v} has degree {found}, expected {d}")]
    Degree { v: usize, found: usize, d: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("spectral parameter must lie in the upper half-plane (eta={0})")]
    NotUpperHalfPlane(f64),
    #[error("invalid law parameters: {0}")]
    LawParams(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("singular matrix in {0}")]
    Singular(&'static str),
    #[error("need at least {needed} sizes for a scaling fit, got {got}")]
    InsufficientSizes { needed: usize, got: usize },
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResamplingError {
    #[error("radius must be at least 1")]
    Radius,
    #[error("ball of radius {ell} around {center} swallows every edge")]
    NoPartnerEdges { center: usize, ell: usize },
    #[error("alpha {alpha} out of range (mu={mu})")]
    AlphaOutOfRange { alpha: usize, mu: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}
