use std::path::PathBuf;

use thiserror::Error;

use crate::types::SolverId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{solver} produced a non-finite value at iteration {iteration}")]
    NonFinite { solver: SolverId, iteration: usize },

    #[error("unknown solver `{0}` (expected one of ista, fista, fpcbb, twist)")]
    UnknownSolver(String),

    #[error("sparse coding failed for {what} {index}: {source}")]
    Coding {
        what: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("not enough histogram bins to fit: need {needed} non-empty bins, found {found}")]
    InsufficientBins { needed: usize, found: usize },

    #[error("reference image has zero Frobenius norm")]
    ZeroReference,

    #[error("image of {height}x{width} is smaller than the {window}x{window} window")]
    ImageTooSmall {
        height: usize,
        width: usize,
        window: usize,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("{}: no such file", .0.display())]
    MissingPath(PathBuf),

    #[error(transparent)]
    Artifact(#[from] ArtifactError),

    #[error("cannot decode image: {0}")]
    Image(#[from] image::ImageError),

    #[error("{}: {source}", path.display())]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Failures while decoding the binary artifact format.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ArtifactError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported artifact version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated stream: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("declared dimensions {rows}x{cols} overflow the addressable size")]
    DimensionOverflow { rows: u64, cols: u64 },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("payload contains a non-finite value")]
    NonFinite,
    #[error("artifact violates type invariant: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Process exit status for this failure: 2 for usage problems and
    /// missing inputs, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::MissingPath(_) => 2,
            Error::Path { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        }
    }

    pub(crate) fn at_path(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Path { path, source }
    }
}

pub(crate) fn ensure_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
