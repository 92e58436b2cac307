use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The top eigenvalue of `P P^T` is not a strict maximum, so the dual-norm
    /// gradient (and everything built on it) is undefined at this point.
    #[error("eigenvalue coalescence: relative top gap {gap:.3e} <= {gap_tol:.3e}")]
    EigenvalueCoalescence { gap: f64, gap_tol: f64 },

    #[error("degenerate segment: eta (x) a coincides with eta (x) b")]
    DegenerateSegment,

    #[error("map is not twice differentiable at {0:?}")]
    NonSmoothPoint(Vec<f64>),

    #[error("point {point:?} is not at least {margin} inside the domain")]
    DomainMargin { point: Vec<f64>, margin: f64 },

    #[error("curve is not unit speed (speed defect {0:.3e})")]
    NotUnitSpeed(f64),

    #[error("flow start outside Xi: |xi^T Du(x0)| = {0:.3e}")]
    StartOutsideXi(f64),

    #[error("flow start lies in the vertical set: |h(x0)| = {0:.3e}")]
    StartInVerticalSet(f64),

    #[error("line search stalled at iteration {iteration} (gradient norm {gradient_norm:.3e})")]
    NonDecreaseStall {
        iteration: usize,
        gradient_norm: f64,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
