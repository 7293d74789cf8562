use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid domain spec: {0}")]
    Spec(String),
    #[error("sampling failed: {0}")]
    Sampling(String),
    #[error("boundary projection failed: {0}")]
    Projection(String),
    #[error("point is not on the boundary (|rho| = {residual:e})")]
    NotOnBoundary { residual: f64 },
    #[error("degenerate gradient at {point:?}")]
    DegenerateGradient { point: Vec<f64> },
    #[error("sandwich lower bound violated: ratio {ratio:.6e} < 1 at {witness:?} (smallest feasible K1 so far {k1:.6e})")]
    LowerBoundViolated { ratio: f64, witness: Vec<f64>, k1: f64 },
    #[error("hypothesis failed on {failed} of {total} samples (worst c = {worst_c:.6e} at {witness:?})")]
    HypothesisFailed {
        failed: usize,
        total: usize,
        worst_c: f64,
        witness: Vec<f64>,
    },
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Spec(_) | Error::Json(_) | Error::Io(_) => 2,
            Error::Expr(ExprError::Syntax { .. } | ExprError::Dimension(_)) => 2,
            Error::LowerBoundViolated { .. } | Error::HypothesisFailed { .. } => 1,
            Error::Expr(ExprError::Eval { .. })
            | Error::Sampling(_)
            | Error::Projection(_)
            | Error::NotOnBoundary { .. }
            | Error::DegenerateGradient { .. }
            | Error::Fit(_) => 3,
        }
    }
}
