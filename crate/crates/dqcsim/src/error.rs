use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DqcError {
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),
    #[error("register of {0} qubits exceeds the cap of {1}")]
    SizeCap(usize, usize),
    #[error("gate {gate} expects {expected} target(s), got {got}")]
    Arity { gate: String, expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("state is not normalised (norm² = {0})")]
    NotNormalised(f64),
    #[error("cannot measure the identity string")]
    IdentityMeasurement,
    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("pattern is not deterministic: {0}")]
    NonDeterministic(String),
    #[error("interface mismatch: {0}")]
    InterfaceMismatch(String),
    #[error("interface `{0}` bound twice")]
    DoubleBinding(String),
    #[error("malformed channel: {0}")]
    MalformedChannel(String),
    #[error("protocol order violation: {0}")]
    OrderViolation(String),
    #[error("malformed message: {0}")]
    MalformedMessage(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("not a stabilizer element: {0}")]
    NotStabilizer(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, DqcError>;
