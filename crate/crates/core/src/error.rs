use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("non-finite value at linear offset {0}")]
    NonFinite(usize),

    #[error("rank {rank} for mode {mode} must lie in 1..={extent}")]
    InvalidRank {
        mode: usize,
        rank: usize,
        extent: usize,
    },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("SVD of {rows}x{cols} matrix did not converge in {sweeps} sweeps")]
    SvdNoConvergence {
        rows: usize,
        cols: usize,
        sweeps: usize,
    },

    #[error("solver diverged at iteration {iter}: residual {residual:.3e} vs {earlier:.3e} twenty iterations earlier")]
    Diverged {
        iter: usize,
        residual: f64,
        earlier: f64,
    },

    #[error("reference tensor has zero Frobenius norm")]
    ZeroReference,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
