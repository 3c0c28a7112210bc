use thiserror::Error;

/// Failure modes shared by every module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid configuration field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },
    #[error("element is not hyperbolic (|trace| = {trace})")]
    NotHyperbolic { trace: f64 },
    #[error("word enumeration would exceed the cap of {cap} elements")]
    MemoryCap { cap: usize },
    #[error("quadratic differential vanishes: {0}")]
    ZeroDifferential(String),
    #[error("deformation too large: |z| sup|nu| = {product} exceeds {limit}")]
    DeformationTooLarge { product: f64, limit: f64 },
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("linear solve failed: relative residual {residual:e} above {tol:e}")]
    SolverFailed { residual: f64, tol: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: String, iterations: usize, residual: f64 },
    #[error("harmonic residual {residual:e} exceeds the gate {gate:e}")]
    ResidualGate { residual: f64, gate: f64 },
    #[error("invalid mesh: {0}")]
    MeshInvalid(String),
    #[error("point {0} could not be located in the fundamental domain")]
    PointLocation(String),
    #[error("automorphy defect {defect:e} exceeds {limit:e} at depth {depth}")]
    DepthTooSmall { depth: usize, defect: f64, limit: f64 },
    #[error("refinement level {level} exceeds the maximum {max}")]
    RefinementTooDeep { level: usize, max: usize },
    #[error("metric degenerate at sample {sample}: min eigenvalue {eig:e}")]
    DegenerateMetric { sample: usize, eig: f64 },
    #[error("line search failed after {0} halvings")]
    LineSearchFailed(usize),
    #[error("block system is singular: {0}")]
    SingularSystem(String),
    #[error("grid point ({p1}, {p2}): {source}")]
    GridPoint { p1: f64, p2: f64, source: Box<LabError> },
    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        LabError::ConfigInvalid { field: field.to_string(), reason: reason.into() }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
