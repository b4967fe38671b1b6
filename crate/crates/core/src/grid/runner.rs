//! Vectorized fixed-horizon episode runner.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use super::mdp::TabularMdp;
use super::observation::{Encoder, EncodingKind};
use super::task::goal_reward;
use crate::rng::{self, SimRng};

/// Where an instance's goal comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GoalMode {
    /// No goal (reward-free or intrinsic-reward environments with one-hot observations).
    None,
    Fixed(usize),
    /// A uniformly random free cell drawn at every reset.
    Sampled,
}

/// Reward paid on arrival in the next state.
#[derive(Debug, Clone, PartialEq)]
pub enum RewardSource {
    GoalIndicator,
    /// Per-state reward table (e.g. normalized empowerment).
    StateTable(Arc<[f64]>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunnerConfig {
    pub n_envs: usize,
    pub episode_length: usize,
    pub encoding: EncodingKind,
    pub goal: GoalMode,
    /// Goal shown in plane observations when `goal` is [`GoalMode::None`].
    pub display_goal: Option<usize>,
    pub reward: RewardSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunnerError {
    #[error("action {action} out of range for env {env}")]
    ActionOutOfRange { env: usize, action: usize },
    #[error("expected {expected} actions, got {found}")]
    ActionCount { expected: usize, found: usize },
    #[error("runner needs at least one environment")]
    NoEnvs,
    #[error("episode length must be at least 1")]
    ZeroEpisodeLength,
    #[error("goal-indicator reward requires a goal")]
    MissingGoal,
    #[error("goal {0} out of range")]
    GoalOutOfRange(usize),
    #[error("reward table has {found} entries for {expected} states")]
    RewardTableSize { expected: usize, found: usize },
    #[error("plane observations require a goal or display goal")]
    PlanesWithoutGoal,
}

#[derive(Debug, Clone)]
struct EnvInstance {
    rng: SimRng,
    state: usize,
    goal: Option<usize>,
    t: usize,
}

/// Result of stepping every instance once. Indexed by instance.
#[derive(Debug, Clone, PartialEq)]
pub struct StepBatch {
    pub states: Vec<usize>,
    pub goals: Vec<Option<usize>>,
    pub actions: Vec<usize>,
    pub next_states: Vec<usize>,
    pub rewards: Vec<f64>,
    /// True exactly on the step that reaches the episode length.
    pub truncated: Vec<bool>,
}

/// `N` independent environment instances, each with its own seeded stream.
///
/// Episodes never terminate early; an instance that truncates is reset
/// immediately so the next call to [`EpisodeRunner::step`] starts a fresh
/// episode from the state reported by [`EpisodeRunner::states`].
#[derive(Debug, Clone)]
pub struct EpisodeRunner {
    mdp: Arc<TabularMdp>,
    encoder: Encoder,
    config: RunnerConfig,
    envs: Vec<EnvInstance>,
    step_counter: u64,
}

impl EpisodeRunner {
    pub fn new(mdp: Arc<TabularMdp>, config: RunnerConfig, seed: u64) -> Result<Self, RunnerError> {
        if config.n_envs == 0 {
            return Err(RunnerError::NoEnvs);
        }
        if config.episode_length == 0 {
            return Err(RunnerError::ZeroEpisodeLength);
        }
        let n = mdp.n_states();
        match (&config.goal, &config.reward) {
            (GoalMode::None, RewardSource::GoalIndicator) => return Err(RunnerError::MissingGoal),
            (GoalMode::Fixed(g), _) if *g >= n => return Err(RunnerError::GoalOutOfRange(*g)),
            (_, RewardSource::StateTable(t)) if t.len() != n => {
                return Err(RunnerError::RewardTableSize {
                    expected: n,
                    found: t.len(),
                })
            }
            _ => {}
        }
        if let Some(g) = config.display_goal {
            if g >= n {
                return Err(RunnerError::GoalOutOfRange(g));
            }
        }
        if config.encoding == EncodingKind::Planes && config.goal == GoalMode::None && config.display_goal.is_none() {
            return Err(RunnerError::PlanesWithoutGoal);
        }
        let encoder = Encoder::new(&mdp, config.encoding);
        let envs = (0..config.n_envs)
            .map(|i| EnvInstance {
                rng: rng::stream(seed, &[rng::label("env"), i as u64]),
                state: 0,
                goal: None,
                t: 0,
            })
            .collect();
        let mut runner = EpisodeRunner {
            mdp,
            encoder,
            config,
            envs,
            step_counter: 0,
        };
        runner.reset();
        Ok(runner)
    }

    fn reset_instance(mdp: &TabularMdp, goal_mode: GoalMode, env: &mut EnvInstance) {
        let u: f64 = env.rng.gen();
        env.state = rng::sample_dense(mdp.initial_distribution(), u);
        env.goal = match goal_mode {
            GoalMode::None => None,
            GoalMode::Fixed(g) => Some(g),
            GoalMode::Sampled => Some(env.rng.gen_range(0..mdp.n_states())),
        };
        env.t = 0;
    }

    /// Starts a fresh episode in every instance.
    pub fn reset(&mut self) {
        for env in &mut self.envs {
            Self::reset_instance(&self.mdp, self.config.goal, env);
        }
    }

    pub fn step(&mut self, actions: &[usize]) -> Result<StepBatch, RunnerError> {
        if actions.len() != self.envs.len() {
            return Err(RunnerError::ActionCount {
                expected: self.envs.len(),
                found: actions.len(),
            });
        }
        let n_actions = self.mdp.n_actions();
        if let Some((env, &action)) = actions.iter().enumerate().find(|(_, &a)| a >= n_actions) {
            return Err(RunnerError::ActionOutOfRange { env, action });
        }
        let n = self.envs.len();
        let mut batch = StepBatch {
            states: Vec::with_capacity(n),
            goals: Vec::with_capacity(n),
            actions: actions.to_vec(),
            next_states: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            truncated: Vec::with_capacity(n),
        };
        for (env, &action) in self.envs.iter_mut().zip(actions) {
            let u: f64 = env.rng.gen();
            let next = rng::sample_sparse(self.mdp.successors(env.state, action), u);
            let reward = match &self.config.reward {
                RewardSource::GoalIndicator => goal_reward(next, env.goal.expect("validated at construction")),
                RewardSource::StateTable(table) => table[next],
            };
            env.t += 1;
            let truncated = env.t >= self.config.episode_length;
            batch.states.push(env.state);
            batch.goals.push(env.goal);
            batch.next_states.push(next);
            batch.rewards.push(reward);
            batch.truncated.push(truncated);
            env.state = next;
            if truncated {
                Self::reset_instance(&self.mdp, self.config.goal, env);
            }
        }
        self.step_counter += n as u64;
        Ok(batch)
    }

    /// Current state of every instance.
    pub fn states(&self) -> Vec<usize> {
        self.envs.iter().map(|e| e.state).collect()
    }

    pub fn goals(&self) -> Vec<Option<usize>> {
        self.envs.iter().map(|e| e.goal).collect()
    }

    /// Goal to draw in plane observations for a given instance goal.
    pub fn observed_goal(&self, goal: Option<usize>) -> Option<usize> {
        goal.or(self.config.display_goal)
    }

    /// Encodes `state` as seen with `goal` into `out`.
    pub fn encode_into(&self, state: usize, goal: Option<usize>, out: &mut [f64]) {
        self.encoder
            .encode_into(state, self.observed_goal(goal), out)
            .expect("runner validated the encoding inputs");
    }

    /// Current observation of every instance.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.envs
            .iter()
            .map(|e| {
                let mut obs = vec![0.0; self.encoder.dim()];
                self.encode_into(e.state, e.goal, &mut obs);
                obs
            })
            .collect()
    }

    pub fn obs_dim(&self) -> usize {
        self.encoder.dim()
    }

    pub fn n_envs(&self) -> usize {
        self.envs.len()
    }

    pub fn episode_length(&self) -> usize {
        self.config.episode_length
    }

    /// Total environment steps across all instances.
    pub fn step_counter(&self) -> u64 {
        self.step_counter
    }

    pub fn mdp(&self) -> &Arc<TabularMdp> {
        &self.mdp
    }

    pub fn config(&self) -> &RunnerConfig {
        &self.config
    }
}
