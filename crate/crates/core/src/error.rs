use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("class {class} has non-positive mass {mass}")]
    NonPositiveMass { class: usize, mass: String },
    #[error("class masses sum to {sum}, expected 1")]
    MassesNotOne { sum: String },
    #[error("value {value} at ({row}, {col}) is outside [0, 1]")]
    ValueOutOfRange { row: usize, col: usize, value: String },
    #[error("kernel declared symmetric but ({row}, {col}) differs from its transpose")]
    AsymmetricDeclaredSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("edge endpoint {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("loop edge at vertex {0}")]
    LoopEdge(usize),
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("coloring is not invariant for the kernel")]
    NotInvariant,
    #[error("distribution does not match the kernel's signatures: {0}")]
    InconsistentDidm(String),
    #[error("operation requires a symmetric kernel")]
    AsymmetricKernel,
    #[error("enumeration budget of {limit} trees exceeded")]
    BudgetExceeded { limit: usize },
    #[error("malformed tree expression: {0}")]
    MalformedExpression(String),
    #[error("pattern graph is not a tree")]
    NotATree,
    #[error("input too large: {0}")]
    TooLarge(String),
    #[error("target density {0} is outside [0, 1]")]
    QOutOfRange(String),
    #[error("invalid blowup plan: {0}")]
    InvalidPlan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("oracles disagree: {0}")]
    OracleDisagreement(String),
    #[error("internal invariant violated: {0}")]
    Defect(String),
}

pub type Result<T> = std::result::Result<T, Error>;
