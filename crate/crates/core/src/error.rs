use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("node {to} is unreachable from node {from}")]
    Unreachable { from: String, to: String },

    #[error("link {0} is a shortest-path tree arc, not a sidetrack")]
    TreeArc(usize),

    #[error("sidetrack set does not describe a loop-free path")]
    Malformed,

    #[error("flow {src}->{dst} has no candidate path")]
    NoPath { src: String, dst: String },

    #[error("instance too large for exhaustive search ({0} combinations)")]
    TooLarge(u128),

    #[error("plan: {0}")]
    Plan(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
