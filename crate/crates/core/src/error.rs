use thiserror::Error;

/// Errors produced by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not a valid quantum covariance: {0}")]
    NotQuantumCovariance(String),

    #[error("unphysical state: symplectic eigenvalue {nu} is below 1")]
    Unphysical { nu: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular conditioned block ({dim}x{dim}, row-major): {entries:?}")]
    Singular { dim: usize, entries: Vec<f64> },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no modulation, EB mapping singular")]
    NoModulation,

    #[error("no correlation to align: {0}")]
    NoCorrelation(String),

    #[error("degenerate transform: |det M| = {det:e}")]
    DegenerateTransform { det: f64 },

    #[error("symmetrization is not allowed after a transformation")]
    SymmetrizeAfterTransform,

    #[error("quadrature did not converge: relative change {rel_change:e} on node doubling")]
    Quadrature { rel_change: f64 },

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("inconsistent covariance for cross-check: asin argument {arg}")]
    InconsistentCrossCheck { arg: f64 },

    #[error("imbalance too small for cross-correlation route: |sin(theta+phi)| = {sin_delta:e}")]
    ImbalanceTooSmall { sin_delta: f64 },

    #[error("normalization failed: {0}")]
    NormalizationFailed(String),

    #[error("frame format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
