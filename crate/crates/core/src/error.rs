use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = DdfError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum DdfError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("face {face} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        count: usize,
    },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),

    #[error("invalid file format: {0}")]
    Format(String),

    #[error("unsupported format version: expected {expected}, found {found}")]
    VersionMismatch { expected: String, found: String },

    #[error("no surface in direction")]
    NoSurface,

    #[error("degenerate gradient (norm {0:e})")]
    DegenerateGradient(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numeric failure at iteration {iteration}: {message}")]
    Numeric { iteration: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl DdfError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DdfError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end: 2 for data problems,
    /// 3 for numeric failures, 1 for bad arguments.
    pub fn exit_code(&self) -> i32 {
        match self {
            DdfError::InvalidArgument(_) => 1,
            DdfError::Numeric { .. } | DdfError::DegenerateGradient(_) => 3,
            _ => 2,
        }
    }
}
