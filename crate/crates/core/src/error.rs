use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Everything that can go wrong inside the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter {values:?} violates its {constraint} constraint")]
    ConstraintViolated { values: Vec<f64>, constraint: &'static str },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("loss `{loss}` cannot be evaluated on a {datum} datum")]
    ShapeMismatch { loss: &'static str, datum: &'static str },
    #[error("datum contains a non-finite value")]
    NonFiniteDatum,
    #[error("datum {index}: {source}")]
    AtDatum { index: usize, source: Box<Error> },
    #[error("no computable per-datum minimizer for loss `{0}`; supply one explicitly")]
    NoMinimizer(&'static str),
    #[error("prior mode is not available in closed form for {0}")]
    ModeUnavailable(&'static str),
    #[error("rejection sampling exceeded {cap} attempts for one draw")]
    RejectionCapExceeded { cap: usize },
    #[error("loss is not finite at theta = {theta:?}")]
    NonFiniteLoss { theta: Vec<f64> },
    #[error("posterior undefined: normalizing integral is zero or infinite")]
    PosteriorUndefined,
    #[error("utility is not finite for action {action} at sample {sample}")]
    NonFiniteUtility { action: usize, sample: usize },
    #[error("perfect fit: unit-information denominator is {0}, choose a fixed weight")]
    PerfectFit(f64),
    #[error("not enough data: need {needed}, found {found}")]
    NotEnoughData { needed: usize, found: usize },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("optimizer stuck: every trial point is outside the finite region")]
    OptimizerStuck,
    #[error("finite-difference stencil produced a non-finite value at offset {coordinate}")]
    NonFiniteStencil { coordinate: usize },
    #[error("Hessian is not positive definite (eigenvalues {eigenvalues:?})")]
    NotPositiveDefinite { eigenvalues: Vec<f64> },
    #[error("quadrature did not converge after {panels} panels (last change {change:e})")]
    NonConvergence { panels: usize, change: f64 },
    #[error("every importance weight is zero; the proposal misses the posterior")]
    ProposalMissed,
    #[error("importance weight for draw {draw} is not finite")]
    NonFiniteWeight { draw: usize },
    #[error("no start point with finite density after {attempts} prior draws")]
    NoValidStart { attempts: usize },
    #[error("no proposal accepted after burn-in (step scales {step_scales:?})")]
    NoAcceptance { step_scales: Vec<f64> },
    #[error("too few draws: need {needed}, found {found}")]
    TooFewDraws { needed: usize, found: usize },
    #[error("replication {index}: {source}")]
    Replication { index: usize, source: Box<Error> },
    #[error("censoring fraction {0} cannot be attained")]
    UnattainableCensoring(f64),
    #[error("simulated dataset has no events")]
    NoEvents,
    #[error("model size {size} exceeds the cap of {cap}")]
    ModelTooLarge { size: usize, cap: usize },
    #[error("neighbourhood radius {eps} is below the grid step {step}")]
    GridTooCoarse { eps: f64, step: f64 },
    #[error("prior puts no mass within {eps} of the target {target}")]
    PriorExcludesTarget { target: f64, eps: f64 },
    #[error("{0}")]
    Unsupported(&'static str),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn at_datum(index: usize, source: Error) -> Self {
        Error::AtDatum { index, source: Box::new(source) }
    }
}
