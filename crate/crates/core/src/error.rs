use thiserror::Error;

/// Two objects that must share a block layout do not.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("shape mismatch: expected {expected}, found {found}")]
pub struct ShapeError {
    pub expected: String,
    pub found: String,
}

impl ShapeError {
    pub fn new(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Self { expected: expected.into(), found: found.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("symmetric eigendecomposition failed")]
    EigenFailed,
    #[error("matrix is singular")]
    Singular,
    #[error("outside the near-identity domain: spectral radius {radius} of I - M must stay below {limit}")]
    Domain { radius: f64, limit: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { what: &'static str, iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("step equation not solved after {iterations} iterations (residual {residual:e})")]
    StepSolveFailed { iterations: usize, residual: f64 },
    #[error("oracle evaluation failed: {0}")]
    Oracle(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point outside the problem domain: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
}

/// Rejections raised before iteration 0. Failures during iteration are
/// reported through the trace status instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("invalid step schedule: {0}")]
    Schedule(String),
    #[error("initial point has non-finite entries")]
    NonFiniteStart,
    #[error("initial point is infeasible")]
    InfeasibleStart,
    #[error("projected run requested on a problem without a projector")]
    MissingProjector,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("trace has {rows} usable rows, at least {needed} are needed")]
    TooShort { rows: usize, needed: usize },
    #[error("finite-difference step {0:e} outside [1e-8, 1e-3]")]
    Epsilon(f64),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}
