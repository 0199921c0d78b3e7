use thiserror::Error;

/// Errors surfaced by the numerical modules.
///
/// Variants carry enough context to be rendered as a machine-readable
/// `{code, message}` pair by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("dimension {0} not supported (expected 1, 2 or 3)")]
    BadDimension(usize),

    #[error("shooting bisection could not separate blow-up from sign-crossing after {iters} iterations (a in [{lo}, {hi}])")]
    BracketFailure { iters: usize, lo: f64, hi: f64 },

    #[error("ODE integration failed to converge: {0}")]
    Nonconvergence(String),

    #[error("tail fit window too noisy (residual {residual:.3e} > {limit:.1e}); increase r_max")]
    WindowTooNoisy { residual: f64, limit: f64 },

    #[error("quadrature unresolved: h vs h/2 disagree by {rel:.3e} (limit {limit:.1e})")]
    ResolutionUnresolved { rel: f64, limit: f64 },

    #[error("design matrix ill-conditioned (cond {cond:.3e})")]
    IllConditionedFit { cond: f64 },

    #[error("eigenvalue discretization unresolved: refinement levels disagree by {rel:.3e}")]
    DiscretizationUnresolved { rel: f64 },

    #[error("degenerate spike configuration: {0}")]
    DegenerateConfig(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("near-singular linear operator: iterative solver stalled at relative residual {residual:.3e}")]
    NearSingularOperator { residual: f64 },

    #[error("Gram matrix singular (det {det:.3e} below threshold)")]
    GramSingular { det: f64 },

    #[error("Newton iteration exceeded {0} iterations")]
    MaxIterExceeded(usize),

    #[error("Newton iteration diverged (residual grew {factor:.1}x over {steps} damped steps)")]
    Diverged { factor: f64, steps: usize },

    #[error("no interior critical point of the radial profile on [{lo:.3e}, {hi:.3e}] (derivative has constant sign)")]
    NoInteriorCriticalPoint { lo: f64, hi: f64 },

    #[error("optimizer terminated on the boundary of the admissible set: {0}")]
    BoundaryAttained(String),

    #[error("component position matches no projection case: {0}")]
    UnsupportedCase(String),

    #[error("hypothesis validation failed: clause {0}")]
    HypothesisFailed(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable code for the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParam(_) => "INVALID_PARAM",
            Error::BadDimension(_) => "BAD_DIMENSION",
            Error::BracketFailure { .. } => "BRACKET_FAILURE",
            Error::Nonconvergence(_) => "NONCONVERGENCE",
            Error::WindowTooNoisy { .. } => "WINDOW_TOO_NOISY",
            Error::ResolutionUnresolved { .. } => "RESOLUTION_UNRESOLVED",
            Error::IllConditionedFit { .. } => "ILL_CONDITIONED_FIT",
            Error::DiscretizationUnresolved { .. } => "DISCRETIZATION_UNRESOLVED",
            Error::DegenerateConfig(_) => "DEGENERATE_CONFIG",
            Error::GridTooSmall(_) => "GRID_TOO_SMALL",
            Error::NearSingularOperator { .. } => "NEAR_SINGULAR_OPERATOR",
            Error::GramSingular { .. } => "GRAM_SINGULAR",
            Error::MaxIterExceeded(_) => "MAX_ITER_EXCEEDED",
            Error::Diverged { .. } => "DIVERGED",
            Error::NoInteriorCriticalPoint { .. } => "NO_INTERIOR_CRITICAL_POINT",
            Error::BoundaryAttained(_) => "BOUNDARY_ATTAINED",
            Error::UnsupportedCase(_) => "UNSUPPORTED_CASE",
            Error::HypothesisFailed(_) => "HYPOTHESIS_FAILED",
            Error::Config(_) => "CONFIG_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }

    /// Process exit status the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_) | Error::BadDimension(_) | Error::Config(_) | Error::Io(_) => 2,
            Error::HypothesisFailed(_) => 3,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
