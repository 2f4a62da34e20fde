use thiserror::Error;

/// Errors raised by network construction, assembly, linear algebra and time stepping.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("network graph is disconnected ({} components, sizes {:?})", .components.len(), .components.iter().map(Vec::len).collect::<Vec<_>>())]
    DisconnectedGraph { components: Vec<Vec<usize>> },

    #[error("edge {edge}: coefficient {matrix} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NonSpdCoefficient {
        edge: usize,
        matrix: &'static str,
        min_eigenvalue: f64,
    },

    #[error("edge {edge} has zero length")]
    ZeroLengthEdge { edge: usize },

    #[error("no Dirichlet node in network")]
    EmptyDirichletSet,

    #[error("invalid network data: {0}")]
    InvalidNetwork(String),

    #[error("degenerate network: largest component has {nodes} node(s)")]
    DegenerateNetwork { nodes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("matrix is not positive definite ({context}): pivot {pivot} = {value:e}")]
    NotPositiveDefinite {
        pivot: usize,
        value: f64,
        context: String,
    },

    #[error("network node {node} lies outside the coarse grid box")]
    NodeOutsideBox { node: usize },

    #[error("conjugate gradient breakdown at iteration {iteration}: p^T A p = {curvature:e}")]
    BreakdownIndefinite { iteration: usize, curvature: f64 },

    #[error("{method} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite state at step {step}")]
    NonfiniteState { step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
