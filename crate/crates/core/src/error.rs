use std::io;

use thiserror::Error;

pub type Result<T, E = LungError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LungError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("nodule has no on-voxels")]
    EmptyNodule,

    #[error("nodule has {0} connected components, expected 1")]
    MultiComponent(usize),

    #[error("set is empty")]
    EmptySet,

    #[error("acceptance fraction is 1, score is unbounded")]
    DegenerateAcceptance,

    #[error("feature `{0}` has zero spread across the seed set")]
    DegenerateStats(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}
