use rgsb_sdp::{SdpError, Status};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("insufficient samples: {have} < {need}")]
    InsufficientSamples { have: usize, need: usize },
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPsd(f64),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("solver failed with status {0:?}")]
    Solver(Status),
    #[error("rank-one extraction refused: residual {residual:.3e} exceeds {limit:.3e}")]
    ExtractionRefused { residual: f64, limit: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
