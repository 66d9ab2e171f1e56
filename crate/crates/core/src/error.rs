use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} labeled nodes, found {found}")]
    TooFewLabeled { needed: usize, found: usize },

    #[error("graph has no edges")]
    NoEdges,

    #[error("no edge has both endpoints labeled")]
    NoLabeledEdge,

    #[error("no labeled node available for scoring")]
    NoLabeledNode,

    #[error("spatial group is empty")]
    EmptyGroup,

    #[error("distribution totals differ: {lhs} vs {rhs}")]
    Unbalanced { lhs: f64, rhs: f64 },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("backward requires a 1x1 loss, got {0}x{1}")]
    NotScalar(usize, usize),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
