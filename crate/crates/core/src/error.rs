use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    /// A catalog topology failed validation.
    #[error("topology {id}: {reason}")]
    Schema { id: u32, reason: String },

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bad LFF magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("LFF channel count must be 4, found {0}")]
    ChannelCount(u32),

    #[error("non-finite value at index {index} (channel {channel}, x {x}, y {y})")]
    NonFinite {
        index: usize,
        channel: usize,
        x: usize,
        y: usize,
    },

    #[error("face {face} ({label}) is self-intersecting")]
    SelfIntersectingFace { face: usize, label: String },

    #[error("no cases found in {0}")]
    NoCases(PathBuf),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
