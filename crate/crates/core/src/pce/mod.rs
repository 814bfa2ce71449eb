//! Policy collection and elimination: pre-train a small set of policy-value
//! pairs that covers the task distribution, then fine-tune on a new task by
//! optimistic selection with statistical elimination.

mod cover;
mod experiment;
mod finetune;
mod pretrain;

pub use cover::{cnd, greedy_cover, CoverMatrix, BOUNDARY_TOL};
pub use experiment::{
    mean_and_stderr, optimistic_baseline, run_baseline_experiment, run_pce_experiment,
    write_regret_csv, PceConfig, PceExperimentResult, PceRun,
};
pub use finetune::{
    elimination_threshold, finetune, Elimination, EliminationEvent, EpisodeRecord, FallbackEvent,
    RegretTrace,
};
pub use pretrain::{
    default_accuracy, initial_tasks, pretrain, stopping_statistic, PairDocument, PolicyValuePair,
    PolicyValueSet, PolicyValueSetDocument, PretrainConfig, PretrainProvenance,
};

use thiserror::Error;

use crate::mdp::MdpError;
use crate::oracles::OracleError;

#[derive(Debug, Error)]
pub enum PceError {
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("cover of size {cover} is not smaller than the {tasks} sampled tasks")]
    DegenerateCover { cover: usize, tasks: usize },
    #[error("policy-value set is empty")]
    EmptySet,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}
