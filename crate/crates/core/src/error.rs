use thiserror::Error;

/// Failures of the generic numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    #[error("root not bracketed on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NotBracketed {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("quadrature on [{lo}, {hi}] reached error {error:e} above tolerance {tolerance:e}")]
    Quadrature {
        lo: f64,
        hi: f64,
        error: f64,
        tolerance: f64,
    },
    #[error("non-finite value encountered at {at}")]
    NonFinite { at: f64 },
}

/// Invalid model specifications or evaluations outside the domain of the exponent.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("the process is a subordinator (canonical drift {drift} <= 0 with no Gaussian part)")]
    Subordinator { drift: f64 },
    #[error("Laplace exponent diverges at theta = {theta}")]
    DivergentExponent { theta: f64 },
    #[error("negative argument p = {0} for the right inverse")]
    DomainError(f64),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("numerical inversion could not be certified: relative disagreement {disagreement:e} at x = {at}")]
    Accuracy { at: f64, disagreement: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid game parameter: {0}")]
    InvalidParameter(String),
    #[error("psi(-1) is infinite: the jump measure has no exponential moment of order one")]
    AssumptionAViolated,
    #[error("no sign change located for {0}")]
    NoRoot(&'static str),
    #[error("regime {requested:?} cannot be used for this instance: {reason}")]
    RegimeNotApplicable {
        requested: crate::game::Regime,
        reason: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(String),
    #[error("model cannot be simulated: {0}")]
    NotSimulable(String),
    #[error("expected payoff is infinite: {0}")]
    Divergent(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Game(#[from] GameError),
}
