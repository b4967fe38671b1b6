//! Tabular gridworld MDPs, observation encodings and a seeded vectorized runner.

mod layout;
mod mdp;
mod observation;
mod runner;
mod task;

pub use layout::{Cell, GridLayout, LayoutError, BUILTIN_LAYOUTS};
pub use mdp::{Action, InvalidSlip, SlipSpec, TabularMdp, N_ACTIONS};
pub use observation::{encode, Encoder, EncodingKind, Observation, ObservationError};
pub use runner::{EpisodeRunner, GoalMode, RewardSource, RunnerConfig, RunnerError, StepBatch};
pub use task::{goal_reward, GoalSpec, RewardKind, TaskError, TaskSpec, EPISODE_LENGTH};

/// Parses a layout document. Alias of [`GridLayout::parse`].
pub fn load_layout(name: &str, text: &str) -> Result<GridLayout, LayoutError> {
    GridLayout::parse(name, text)
}

/// Builds the transition model of `layout` under `slip`.
pub fn build_mdp(layout: &GridLayout, slip: SlipSpec) -> TabularMdp {
    TabularMdp::build(layout, slip)
}
