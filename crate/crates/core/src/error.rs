//! Error type shared by the model, oracle, and simulator.

use thiserror::Error;

/// Errors surfaced by the closed-form model and the simulation machinery.
///
/// A rate leaving the valid probability range is a first-class error, never
/// a clamp: the closed forms are meaningless outside (0, 1] and silently
/// clamping would corrupt parameter sweeps.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    /// A closed-form rate landed outside (0, 1]; the window schedule is too
    /// small for the formulas to describe a probability.
    #[error("model breakdown: {quantity} = {value} is outside (0, 1]")]
    Breakdown { quantity: &'static str, value: f64 },

    /// The stage aggregation denominator 1 - sum(X_k * prod Y_l) was not
    /// positive, so the restart recursion has no finite solution.
    #[error("restart recursion diverged: aggregation denominator = {denominator}")]
    Diverged { denominator: f64 },

    /// Damped iteration and the bisection fallback both failed to reach the
    /// requested tolerance.
    #[error("fixed point did not converge after {iterations} iterations (residual = {residual})")]
    NoConvergence { iterations: u32, residual: f64 },

    /// With no AP successes there are no PS-POLL exchanges, so the PS-POLL
    /// attempt rate has no value (as opposed to being zero).
    #[error("PS-POLL attempt rate is undefined: the AP never succeeds")]
    PspollRateUndefined,

    #[error("stage {stage} out of range; schedule has stages 0..={max_stage}")]
    StageOutOfRange { stage: usize, max_stage: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;
