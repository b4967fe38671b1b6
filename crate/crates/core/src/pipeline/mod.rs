//! Pre-training with empowerment rewards, fine-tuning on goal tasks,
//! evaluation, sweeps and metrics.
//!
//! Information flow is enforced by signatures: [`pretrain`] receives an
//! [`EmpowermentMap`](crate::empowerment::EmpowermentMap) and never a goal,
//! while [`finetune`] receives a goal and never a map.

mod config;
mod metrics;
mod reward;
mod run;
mod sweep;

pub use config::{ExperimentConfig, GoalSweep, PretrainKind, Variant};
pub use metrics::{
    aggregate, mean_and_sem, median_steps, parse_csv, sort_records, steps_to_threshold, to_csv, CurvePoint,
    MetricsRecord, Phase, CSV_HEADER,
};
pub use reward::{RewardShim, ShimKind};
pub use run::{
    evaluate, evaluate_policy, finetune, oracle_return, oracle_values, pretrain, resolve_layout, EvalSetup, Experiment,
    Pretrained,
};
pub use sweep::{completed_runs, plan, summarize, sweep, RunFailure, RunSpec, RunSummary, SweepOutcome};

use thiserror::Error;

use crate::agents::AgentError;
use crate::empowerment::EmpowermentError;
use crate::grid::RunnerError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("empowerment map was computed for a different MDP")]
    FingerprintMismatch,
    #[error("layout {path}: {reason}")]
    Layout { path: String, reason: String },
    #[error("evaluation needs at least one episode")]
    NoEpisodes,
    #[error("malformed metrics CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Empowerment(#[from] EmpowermentError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error(transparent)]
    Nn(#[from] NnError),
}
