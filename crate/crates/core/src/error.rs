use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid manifold: {0}")]
    InvalidManifold(String),

    #[error("point violates manifold constraint (defect {defect:.3e})")]
    InvalidPoint { defect: f64 },

    #[error("frame is not an orthonormal tangent frame (defect {defect:.3e})")]
    InvalidFrame { defect: f64 },

    #[error("vector is not tangent at the base point (defect {defect:.3e})")]
    NotTangent { defect: f64 },

    #[error("vector field `{field}` is not defined on {manifold}")]
    UnsupportedField { field: String, manifold: String },

    #[error("fundamental solution is numerically singular (condition number {condition:.3e})")]
    SingularFundamental { condition: f64 },

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("grid mismatch: {0} vs {1} steps")]
    GridMismatch(usize, usize),

    #[error("partition time {0} does not lie on the grid")]
    PartitionOffGrid(f64),

    #[error("repair of magnitude {magnitude:.3e} at step {step} exceeds {limit:.1e}; step size too coarse")]
    RepairTooLarge { step: usize, magnitude: f64, limit: f64 },

    #[error("Itô and Stratonovich curvature integrals disagree by {gap:.3e} (tolerance {tolerance:.3e})")]
    SchemeDisagreement { gap: f64, tolerance: f64 },

    #[error("curvature of {0} is not parallel")]
    NonParallelCurvature(String),

    #[error("oracle cost guard: n_small = {0} exceeds 3")]
    CostGuard(usize),

    #[error("rank deficient projection (smallest singular value {0:.3e})")]
    RankDeficient(f64),

    #[error("finite-difference noise floor exceeded: {0}")]
    NoiseFloor(String),

    #[error("internal fault: {0}")]
    Internal(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
