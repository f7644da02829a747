use std::io;

use thiserror::Error;

use crate::node::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("structure corrupt: {0}")]
    StructureCorrupt(String),

    #[error("node {0} is not covered by the proof")]
    PathNotCovered(NodeId),

    #[error("blocks must be at least one byte long")]
    BlockTooSmall,

    #[error("index {0} is not the start of a block")]
    NotBlockAligned(u64),

    #[error("version {got} appended out of order (expected {expected})")]
    VersionOutOfOrder { expected: u64, got: u64 },

    #[error("no such version: {0}")]
    NoSuchVersion(u64),

    #[error("challenge region is empty")]
    EmptyRegion,

    #[error("value outside of its domain: {0}")]
    DomainError(String),

    #[error("proof rejected: {0}")]
    ProofRejected(String),

    #[error("diff entry out of range: {0}")]
    DiffOutOfRange(String),

    #[error("diff entries overlap or are unsorted at index {0}")]
    OverlappingDiffs(u64),

    #[error("nothing to commit")]
    EmptyCommit,

    #[error("repository path already exists: {0}")]
    PathExists(String),

    #[error("repository is locked by another writer: {0}")]
    Locked(String),

    #[error("block {0} is missing from the block store")]
    MissingBlock(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("I/O failure: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::StructureCorrupt(msg.into())
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}
