use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("variable x{0} appears more than once (formula must be read-once)")]
    ReadOnce(usize),

    #[error("variable indices must be exactly 1..={expected}; missing x{missing}")]
    NonContiguous { expected: usize, missing: usize },

    #[error("assignment has {got} bits, formula has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },

    #[error("invalid assignment bitstring: {0}")]
    BadBitstring(String),

    #[error("size cap exceeded: {what} = {value} > {cap}")]
    SizeCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("formula is not normalized: leaf at odd depth {0}")]
    NotNormalized(usize),

    #[error("balanced mode requires a complete binary tree")]
    NotBalanced,

    #[error("invalid tail length {t}: {reason}")]
    Tail { t: usize, reason: String },

    #[error("vertex {0} is not a vertex of the formula tree")]
    NotTreeVertex(usize),

    #[error("eigensolver failed to converge on a {dim}x{dim} matrix after {sweeps} sweeps (residual {residual:e})")]
    NoConvergence {
        dim: usize,
        sweeps: usize,
        residual: f64,
    },

    #[error("start state has no component in the 0-eigenspace (norm {0:e})")]
    ZeroProjection(f64),

    #[error("subspaces intersect: smallest principal angle {0:e}")]
    SubspacesIntersect(f64),

    #[error("no eigenvector has overlap above {0:e}")]
    NoRelevantPhase(f64),

    #[error("subformula at vertex {0} evaluates to 1; 0-certificates do not exist")]
    NoCertificate(usize),

    #[error("certificate enumeration exceeded the cap of {0}")]
    CertificateCap(usize),

    #[error("invalid certificate request: {0}")]
    CertificateShape(String),

    #[error("invalid phase-estimation config: {0}")]
    Config(String),

    #[error("bound violated: {0}")]
    ClaimViolation(String),

    #[error("unknown check selector '{0}'")]
    UnknownSelector(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}
