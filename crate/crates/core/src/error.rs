use alloc::string::String;

/// Failures reported by every fallible routine in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported geometry: {0} has no group law")]
    UnsupportedGeometry(&'static str),
    #[error("invalid geometry id `{0}` (expected `euclidean:<n>`, `heisenberg1` or `grushin`)")]
    InvalidGeometryId(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("incomplete field: node {node} has no finite value")]
    IncompleteField { node: usize },
    #[error("node {0} is not a non-exterior node of the domain")]
    OutsideDomain(usize),
    #[error("graph is disconnected: node {node} is unreachable")]
    Disconnected { node: usize },
    #[error("fields live on different domains")]
    DomainMismatch,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty region")]
    EmptyRegion,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
