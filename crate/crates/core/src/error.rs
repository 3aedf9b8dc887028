use thiserror::Error;

/// Errors raised by set construction, instance validation and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale factor must be nonnegative, got {0}")]
    NegativeScale(f64),

    #[error("matrix entry ({row}, {col}) is negative")]
    NegativeEntry { row: usize, col: usize },

    #[error("matrix columns are linearly dependent (rank {rank} < {cols})")]
    RankDeficient { rank: usize, cols: usize },

    #[error("invalid node index list: {0}")]
    InvalidIndices(String),

    #[error("set addition requires summands bounded from above")]
    UnboundedSummand,

    #[error("point is not in the flow cone")]
    NotInCone,

    #[error("node {0} is not incident to any edge")]
    IsolatedNode(usize),

    #[error("edge {edge} has negative fee {fee}")]
    NegativeFee { edge: usize, fee: f64 },

    #[error("unknown set kind `{0}`")]
    UnknownSetKind(String),

    #[error("set of edge {0} has no document representation")]
    NotSerializable(usize),

    #[error("unsupported document version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error(
        "edge {0} carries a nonzero edge utility; the dual solver requires zero edge utilities"
    )]
    NonzeroEdgeUtility(usize),

    #[error("unsupported utility: {0}")]
    UnsupportedUtility(String),

    #[error("dual point lies outside the domain of the dual function")]
    OutsideDomain,

    #[error("support of edge {0} is finite but not attained at the current prices")]
    Unattained(usize),

    #[error("dual function is unbounded below (primal infeasible)")]
    UnboundedDual,

    #[error("enumeration budget exceeded: {edges} edges, limit {limit}")]
    BudgetExceeded { edges: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
