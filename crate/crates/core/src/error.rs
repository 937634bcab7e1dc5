use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalues of Omega*sigma do not pair up (mismatch {0:e})")]
    UnpairedSpectrum(f64),
    #[error("matrix is not symplectic (deviation {0:e})")]
    NotSymplectic(f64),
    #[error("unphysical covariance matrix: minimum symplectic eigenvalue {0}")]
    Unphysical(f64),
    #[error("state carries no covariance matrix (non-Gaussian family)")]
    NonGaussian,
    #[error("i/o: {0}")]
    Io(String),
    #[error("numerical procedure did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
