//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A mathematical precondition was violated (zero inverse, empty batch,
    /// zero scaling factor, inference before training, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Shapes, dimensions, or layer wiring do not line up.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called out of order (e.g. backward without forward).
    #[error("usage error: {0}")]
    Usage(&'static str),

    /// Training produced a non-finite loss.
    #[error("training diverged at iteration {iter}: loss_d={loss_d}, loss_g={loss_g}")]
    Diverged { iter: u64, loss_d: f64, loss_g: f64 },

    /// The Poisson solver hit its iteration cap before reaching tolerance.
    #[error("poisson solver did not converge: residual {residual:.3e} after {iters} iterations")]
    SolverStalled { residual: f64, iters: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Checkpoint file is malformed or truncated.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Checkpoint was written by an incompatible version of the format.
    #[error("checkpoint version {found} unsupported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    /// Checkpoint payload does not match its checksum (corrupt or truncated).
    #[error("checkpoint checksum mismatch")]
    CheckpointChecksum,
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
