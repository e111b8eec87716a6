use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("graph needs at least one agent")]
    EmptyGraph,

    #[error("offsets length {got} does not match agent count {expected}")]
    OffsetLength { expected: usize, got: usize },

    #[error("weights[{i}][{j}] = {value} must be finite and non-negative")]
    InvalidWeight { i: usize, j: usize, value: f64 },

    #[error("weights[{i}][{i}] = {value}; the diagonal must be zero")]
    NonzeroDiagonal { i: usize, value: f64 },

    #[error("offsets[{i}] = {value} must be finite and non-negative")]
    InvalidOffset { i: usize, value: f64 },

    #[error("agent {i}: empty weight row with zero offset, the MT denominator vanishes")]
    ZeroMtDenominator { i: usize },

    #[error("the measure is not reversible for the graph: max detailed-balance residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotReversible { residual: f64, tolerance: f64 },

    #[error("no positive Laplacian eigenvalue: the graph has no spectral gap")]
    NoSpectralGap,

    #[error("the graph does not satisfy the hierarchical leadership ordering: {reason}")]
    NotHierarchical { reason: String },

    #[error("the graph has {count} closed classes; exactly one is required")]
    NoUniqueClosedClass { count: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid probability vector: {0}")]
    InvalidMeasure(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid time step: {0}")]
    InvalidTimeStep(String),

    #[error("velocity diameter increased at t = {t}: {from} -> {to} (allowed slack {slack:.3e})")]
    MonotonicityViolated {
        t: f64,
        from: f64,
        to: f64,
        slack: f64,
    },

    #[error("star graph: {0}")]
    InvalidStar(String),

    #[error("certificate precondition failed: {0}")]
    CertificatePrecondition(String),

    #[error("dissipative-inequality radius: {0}")]
    RadiusSolve(String),

    #[error("envelope maximisation: {0}")]
    Envelope(String),

    #[error("matrix row {row} is not stochastic: {reason}")]
    NotStochastic { row: usize, reason: String },

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("time {t} outside the trajectory horizon [0, {horizon}]")]
    HorizonExceeded { t: f64, horizon: f64 },

    #[error("missing structural constant: {0}")]
    MissingConstant(String),
}
