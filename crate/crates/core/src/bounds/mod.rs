//! Output error bounds.
//!
//! Two sure bounds need the stability constant and full-order residuals:
//! the Lipschitz bound `|l| |r(mu)| / alpha(mu)` on the plain output and the
//! dual-based bound `|r(mu)| |r_d(mu)| / alpha(mu)` on the corrected output.
//! The goal-oriented bound of [`goal`] is probabilistic, holds with risk
//! `alpha`, and is evaluated online without touching full-order data.

pub mod goal;
mod stability;
mod sure;

pub use goal::{
    train_goal_oriented, train_on_params, GoalOrientedBoundData, GoalOrientedEval, TrainingConfig,
    TrainingSnapshots,
};
pub use stability::stability_constant;
pub use sure::{dual_based_bound, lipschitz_bound, sure_bounds, SureBounds};
