//! Error type shared across the crate.

use std::fmt;
use std::path::PathBuf;

/// Everything that can go wrong while loading data or estimating a roll angle.
#[derive(Debug)]
pub enum Error {
    /// An underlying I/O operation failed. Carries the path it failed on.
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A file did not match its expected format. `at` locates the problem
    /// ("line 3" for text formats, "offset 17" for binary ones).
    Parse {
        path: PathBuf,
        at: String,
        message: String,
    },
    /// A disparity map contained zero valid cells.
    EmptyMap,
    /// Two grids that must share dimensions did not.
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// Fewer samples than the estimator needs.
    InsufficientData { needed: usize, got: usize },
    /// The normal equations are too ill-conditioned to solve reliably,
    /// e.g. all samples on one image row. Carries the condition estimate.
    DegenerateGeometry { condition: f64 },
    /// Plane-fit baseline: the disparity gradient has no vertical component,
    /// so the roll angle is undefined.
    VerticalGradient,
    /// A caller-supplied parameter violated its documented range.
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Io { path, source } => write!(f, "{}: {}", path.display(), source),
            Error::Parse { path, at, message } => {
                write!(f, "{}: {}: {}", path.display(), at, message)
            }
            Error::EmptyMap => write!(f, "disparity map has no valid cells"),
            Error::ShapeMismatch { expected, got } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::InsufficientData { needed, got } => {
                write!(f, "need at least {} samples, got {}", needed, got)
            }
            Error::DegenerateGeometry { condition } => write!(
                f,
                "sample geometry is degenerate (condition estimate {:.3e})",
                condition
            ),
            Error::VerticalGradient => {
                write!(f, "disparity gradient has no vertical component; roll undefined")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {}", msg),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
