use thiserror::Error;

/// Errors raised by grid construction, field operations, scenario
/// construction, time stepping and artifact I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid too small: axis {axis} has {extent} samples, stencils need at least {min}")]
    GridTooSmall { axis: usize, extent: usize, min: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid has {nodes} nodes, above the configured cap of {cap}")]
    NodeCapExceeded { nodes: usize, cap: usize },

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid Helmholtz mode: {0}")]
    InvalidMode(String),

    #[error(
        "resonance: lambda = {lambda} hits the discrete Dirichlet spectrum \
         (smallest |lambda^2 - mu| = {gap:e}, residual = {residual:e})"
    )]
    Resonance { lambda: f64, gap: f64, residual: f64 },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("time mesh must be uniform and strictly increasing")]
    NonUniformTimeMesh,

    #[error("time mesh mismatch: {0}")]
    TimeMeshMismatch(String),

    #[error("Helmholtz check failed for {field}: residual {residual:e} exceeds tolerance {tol:e}")]
    HelmholtzPrecondition { field: String, residual: f64, tol: f64 },

    #[error(
        "inhomogeneous constraint violated at time slice {slice}: residual {residual:e} exceeds tolerance {tol:e}"
    )]
    InhomogeneousResidual { slice: usize, residual: f64, tol: f64 },

    #[error("nodal mask changes on {fraction:.3} of nodes between time slices {slice} and {next}")]
    MaskMismatch { slice: usize, next: usize, fraction: f64 },

    #[error("every node is masked: amplitude is below the node threshold everywhere")]
    DegenerateAmplitude,

    #[error("negative K(t) = {0} would give an imaginary lambda")]
    NegativeK(f64),

    #[error("unitarity failure at step {step}: norm drift {drift:e} exceeds {allowed:e}")]
    UnitarityFailure { step: usize, drift: f64, allowed: f64 },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("malformed artifact: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors that report a failed numerical check rather than bad
    /// input.
    pub fn is_check_failure(&self) -> bool {
        matches!(
            self,
            Error::Resonance { .. }
                | Error::HelmholtzPrecondition { .. }
                | Error::InhomogeneousResidual { .. }
                | Error::MaskMismatch { .. }
                | Error::DegenerateAmplitude
                | Error::UnitarityFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
