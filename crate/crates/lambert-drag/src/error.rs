//! Solver error type shared by all modules.

use thiserror::Error;

use crate::lambert::ContinuationTrace;
use crate::real::Real;

#[derive(Debug, Clone, Error)]
pub enum Error<F: Real> {
    /// An operation was asked to evaluate at the gravitational singularity.
    #[error("position is at the origin singularity")]
    OriginSingularity,

    /// The adaptive step fell below `h_min` with the error still above tolerance.
    #[error("step size underflow at t = {t}")]
    StepFailure { t: F },

    #[error("exceeded {max_steps} integration steps at t = {t}")]
    MaxSteps { t: F, max_steps: usize },

    /// Backward solution hit the origin before reaching -T.
    #[error("collision at t = {t_col} before reaching the requested flight time")]
    CollisionBeforeT { t_col: F },

    /// The regularized chart refused a field whose small-radius gradient
    /// check is flagged.
    #[error("friction field fails the small-radius gradient decay check; regularization refused")]
    GradientLimitRefusal,

    /// Regularized integration left the invariant manifold beyond repair.
    #[error("invariant-manifold residual {residual} exceeded the failure threshold")]
    ManifoldDrift { residual: F },

    /// Velocity recovery was requested exactly at a collision point.
    #[error("velocity is undefined at the collision point w = 0")]
    VelocityAtCollision,

    /// The angular increment between two consecutive samples exceeds pi/2,
    /// so the continuous lift cannot be decided.
    #[error("angular increment between samples exceeds pi/2")]
    AngularStepTooLarge,

    /// Exponential bracket expansion failed to enclose the target.
    #[error("bracket expansion failed after {0} doublings")]
    BracketExpansion(usize),

    #[error("iteration failed to converge after {0} iterations")]
    NonConvergence(usize),

    /// The homotopy step fell below the minimal lambda step.
    #[error("continuation stalled at lambda = {lambda}")]
    ContinuationStalled {
        lambda: F,
        trace: Box<ContinuationTrace<F>>,
    },

    /// A returned trajectory swept a full turn and is not an arc.
    #[error("swept angle reached a full turn; not an arc")]
    SweptFullTurn,

    /// The physical-time target was not reached within the fictitious-time
    /// budget of the regularized chart.
    #[error("physical time target not reached within fictitious time {sigma}")]
    FictitiousTimeCap { sigma: F },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl<F: Real> Error<F> {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
