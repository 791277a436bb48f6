use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("eigensolver did not converge (residual {residual:.3e})")]
    Unconverged { residual: f64 },

    #[error("requested J = {requested} exceeds the grid Nyquist limit; max safe J = {max_safe}")]
    Nyquist { requested: usize, max_safe: usize },

    #[error("eigenvalues {start}..={end} form a run of width {width:.3e} >= delta = {delta:.3e}")]
    ClusterTooWide { start: usize, end: usize, width: f64, delta: f64 },

    #[error("cylinder around {center:?} with radius {radius} leaves the data ball of radius {ball_radius}")]
    OutsideDataBall { center: [f64; 2], radius: f64, ball_radius: f64 },

    #[error("grids of the two data sets do not match: {0}")]
    GridMismatch(String),

    #[error("parameter chain violated: {0}")]
    ChainViolation(String),

    #[error("{quantity} underflows a float; ln ln(1/{quantity}) = {lnln_inv}")]
    Underflow { quantity: &'static str, lnln_inv: String },

    #[error("outside the domain: {0}")]
    Domain(String),

    #[error("search space of {estimate} candidates exceeds budget {budget}; try sigma >= {suggested_sigma:.4}")]
    OverBudget { estimate: f64, budget: f64, suggested_sigma: f64 },

    #[error("{0} is not supported for this manifold kind")]
    Unsupported(&'static str),

    #[error("stage `{stage}` failed: {source}")]
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

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
