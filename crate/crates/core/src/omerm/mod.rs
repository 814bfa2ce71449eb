//! Optimistic multi-task training: per-task empirical models with
//! exploration bonuses, clipped optimistic evaluation, and improvement on the
//! average optimistic value.

mod improve;
mod model;
mod suboptimality;
mod train;

pub use improve::{
    average_value, coordinate_ascent, improve_policy, ImproveMode, EXHAUSTIVE_CAP, MAX_SWEEPS,
};
pub use model::{
    bonus, optimistic_eval, optimistic_greedy, BonusSizes, EmpiricalModel, ModelEstimate,
    OptimisticLearner, OptimisticValueTable,
};
pub use suboptimality::{
    distribution_optimum, expected_suboptimality, expected_value, ENUMERATION_CAP,
};
pub use train::{
    default_log_cover, high_prob_eval_episodes, high_prob_runs, high_prob_tasks, omerm_high_prob,
    omerm_iterations, omerm_train, HighProbConfig, HighProbOutput, OmermConfig, OmermLogRow,
    OmermOutput,
};

use thiserror::Error;

use crate::mdp::MdpError;
use crate::oracles::OracleError;

#[derive(Debug, Error)]
pub enum OmermError {
    #[error("no tasks to train on")]
    NoTasks,
    #[error("{policies} deterministic policies exceed the enumeration cap of {cap}")]
    ExhaustiveTooLarge { policies: u128, cap: u128 },
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
