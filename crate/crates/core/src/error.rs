use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("boundary curve intersects itself between samples {0} and {1}")]
    SelfIntersectingBoundary(usize, usize),
    #[error("origin is not inside the domain (winding number {0})")]
    OriginOutsideDomain(i64),
    #[error("conformal map solver failed: {0}")]
    MapSolverDiverged(String),
    #[error("domain too distorted for the conformal map (condition estimate {0:.3e})")]
    DomainTooDistorted(f64),
    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutsideDomain(f64, f64),
    #[error("potential is not positive: value {value:.3e} at ({x:.4}, {y:.4})")]
    NonPositivePotential { value: f64, x: f64, y: f64 },
    #[error("singular exponent alpha = {0} must exceed -1")]
    SingularityMismatch(f64),
    #[error("non-finite value at node {0}")]
    NonFiniteValue(usize),
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NewtonDiverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("Henon solution lost positivity (min value {0:.3e})")]
    PositivityLost(f64),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("solution is not converged")]
    NotConverged,
    #[error("unsupported problem for this operation: {0}")]
    UnsupportedProblem(String),
    #[error("conditions violated: {0}")]
    ConditionsViolated(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wraps the error with the name of the pipeline stage that raised it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
