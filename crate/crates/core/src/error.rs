use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("edge {edge} has length {length}, mesh expects {expected}")]
    LengthMismatch {
        edge: u32,
        length: f64,
        expected: f64,
    },

    #[error("unknown edge {0}")]
    UnknownEdge(u32),

    #[error("unknown vertex {0}")]
    UnknownVertex(u32),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parts do not sum to the full matrix: worst entry ({row}, {col}) deviates by {deviation:e}")]
    PartSumMismatch {
        row: usize,
        col: usize,
        deviation: f64,
    },

    #[error("force parts do not sum to one at dof {dof} (sum {sum})")]
    ForceSumMismatch { dof: usize, sum: f64 },

    #[error("part {0} is never active (pi = 0)")]
    UncoveredPart(usize),

    #[error("subset probabilities sum to {0}, expected 1")]
    ProbabilitySum(f64),

    #[error("invalid group plan: {0}")]
    InvalidPlan(String),

    #[error("zero pivot in LDL^T factorization at column {column}")]
    ZeroPivot { column: usize },

    #[error("delta {delta} is not an integer multiple of the time step {dt}")]
    MisalignedDelta { delta: f64, dt: f64 },

    #[error("time {t} is outside the horizon [0, {horizon})")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("instance with {dofs} dofs exceeds the configured cap of {cap}")]
    ResourceLimit { dofs: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
