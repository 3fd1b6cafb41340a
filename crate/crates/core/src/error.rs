use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for complex dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("matrix field is not Hermitian at point {point} (relative asymmetry {asymmetry:e})")]
    NotHermitian { point: usize, asymmetry: f64 },

    #[error("metric is not positive definite at point {point} (smallest eigenvalue {eigenvalue:e})")]
    NotPositive { point: usize, eigenvalue: f64 },

    #[error("singular matrix at point {point}")]
    SingularMatrix { point: usize },

    #[error("field file format error: {0}")]
    Format(String),

    #[error("field header mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("gauduchon_kernel_not_positive: kernel vector has minimum {min:e}")]
    GauduchonKernelNotPositive { min: f64 },

    #[error("linear solver did not converge: relative residual {residual:e} after {iterations} iterations")]
    LinearSolverFailed { iterations: usize, residual: f64 },

    #[error("max_iters_exceeded: Newton residual {residual:e} after {iterations} iterations")]
    MaxItersExceeded { iterations: usize, residual: f64 },

    #[error("positivity_lost: line search could not keep g' positive (smallest eigenvalue {eigenvalue:e})")]
    PositivityLost { eigenvalue: f64 },

    #[error("line search stalled at residual {residual:e}")]
    LineSearchStalled { residual: f64 },

    #[error("continuation_stalled at t = {t} with step {step:e}")]
    ContinuationStalled { t: f64, step: f64 },

    #[error("constraint_violated: integral constraint value {value:e} exceeds tolerance {tolerance:e}")]
    ConstraintViolated { value: f64, tolerance: f64 },

    #[error("not_closed: sup |d psi| = {defect:e} exceeds tolerance {tolerance:e}")]
    NotClosed { defect: f64, tolerance: f64 },

    #[error("gauge_violated: {0}")]
    GaugeViolated(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidGrid(_) => "invalid_grid",
            Error::AxisOutOfRange { .. } => "axis_out_of_range",
            Error::GridMismatch => "grid_mismatch",
            Error::NotHermitian { .. } => "not_hermitian",
            Error::NotPositive { .. } => "not_positive",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::Format(_) => "format",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::Io(_) => "io",
            Error::GauduchonKernelNotPositive { .. } => "gauduchon_kernel_not_positive",
            Error::LinearSolverFailed { .. } => "linear_solver_failed",
            Error::MaxItersExceeded { .. } => "max_iters_exceeded",
            Error::PositivityLost { .. } => "positivity_lost",
            Error::LineSearchStalled { .. } => "line_search_stalled",
            Error::ContinuationStalled { .. } => "continuation_stalled",
            Error::ConstraintViolated { .. } => "constraint_violated",
            Error::NotClosed { .. } => "not_closed",
            Error::GaugeViolated(_) => "gauge_violated",
            Error::InvalidConfig(_) => "invalid_config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
