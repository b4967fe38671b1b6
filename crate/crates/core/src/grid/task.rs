//! Goal tasks and reward functions.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default fixed episode length.
pub const EPISODE_LENGTH: usize = 32;

/// Which state the task rewards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalSpec {
    /// A fixed state index.
    State(usize),
    /// The state with maximal empowerment, resolved against an empowerment map.
    EmpowermentMax,
    /// A fresh uniformly random goal at the start of every episode.
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardKind {
    GoalIndicator,
    EmpowermentIntrinsic,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub goal: GoalSpec,
    pub reward_kind: RewardKind,
    pub episode_length: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaskError {
    #[error("goal state {goal} out of range for {n_states} states")]
    GoalOutOfRange { goal: usize, n_states: usize },
    #[error("episode length must be at least 1")]
    ZeroEpisodeLength,
    #[error("cannot parse goal {0:?}")]
    BadGoal(String),
}

impl TaskSpec {
    pub fn goal_reaching(goal: usize) -> Self {
        TaskSpec {
            goal: GoalSpec::State(goal),
            reward_kind: RewardKind::GoalIndicator,
            episode_length: EPISODE_LENGTH,
        }
    }

    pub fn validate(&self, n_states: usize) -> Result<(), TaskError> {
        if self.episode_length == 0 {
            return Err(TaskError::ZeroEpisodeLength);
        }
        if let GoalSpec::State(goal) = self.goal {
            if goal >= n_states {
                return Err(TaskError::GoalOutOfRange { goal, n_states });
            }
        }
        Ok(())
    }
}

/// Normalized goal-indicator reward: 1 on the goal, 0 elsewhere.
pub fn goal_reward(state: usize, goal: usize) -> f64 {
    if state == goal {
        1.0
    } else {
        0.0
    }
}

impl fmt::Display for GoalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalSpec::State(s) => write!(f, "{s}"),
            GoalSpec::EmpowermentMax => f.write_str("empowerment-max"),
            GoalSpec::Sampled => f.write_str("sampled"),
        }
    }
}

impl FromStr for GoalSpec {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "empowerment-max" => Ok(GoalSpec::EmpowermentMax),
            "sampled" => Ok(GoalSpec::Sampled),
            other => other
                .parse()
                .map(GoalSpec::State)
                .map_err(|_| TaskError::BadGoal(other.to_string())),
        }
    }
}
