//! Reinforcement-learning agents over MLP or tabular function approximators.
//!
//! All agents share the [`Agent`] interface: they drive an
//! [`EpisodeRunner`](crate::grid::EpisodeRunner) up to a step count, act for
//! evaluation and round-trip through [`Checkpoint`]s. The per-algorithm update
//! rules are also exposed as free functions for direct testing.

mod actor_critic;
mod bc;
mod buffers;
mod config;
mod dqn;
pub mod losses;
mod ppo;
mod reinforce;
pub mod returns;

pub use actor_critic::{ac_td_update, ActorCritic};
pub use bc::{behavior_clone, total_variation, BcConfig};
pub use buffers::{ReplayBuffer, ReplayEntry, RolloutBuffer, Transition};
pub use config::{AgentConfig, Algorithm, DqnConfig, PpoConfig};
pub use dqn::{dqn_update, Dqn};
pub use ppo::{ppo_update, Ppo};
pub use reinforce::{reinforce_update, EpisodeStep, Reinforce};

use rand::Rng;
use thiserror::Error;

use crate::grid::{EpisodeRunner, RunnerError};
use crate::nn::{Adam, Categorical, Checkpoint, Mlp, NnError};
use crate::rng::{self, SimRng};

#[derive(Debug, Error, PartialEq)]
pub enum AgentError {
    #[error("invalid agent config: {0}")]
    Config(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("input sequences differ in length")]
    LengthMismatch,
    #[error("rollout buffer was already used or collected by an older policy")]
    StaleBuffer,
    #[error("replay buffer holds {have} transitions, {need} needed")]
    InsufficientReplay { have: usize, need: usize },
    #[error("no target distribution for state {0}")]
    MissingTarget(usize),
    #[error("checkpoint does not fit this agent: {0}")]
    CheckpointMismatch(String),
    #[error("{0} is not supported by {1}")]
    Unsupported(&'static str, Algorithm),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Runner(#[from] RunnerError),
}

/// A network with its own optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub net: Mlp,
    pub opt: Adam,
}

impl Model {
    pub fn new(net: Mlp) -> Self {
        let opt = Adam::new(net.n_params());
        Model { net, opt }
    }

    /// `input -> hidden... -> output` with fan-in uniform weights.
    pub fn init(input: usize, hidden: &[usize], output: usize, rng: &mut SimRng) -> Result<Self, AgentError> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        Ok(Model::new(Mlp::init(&sizes, rng)?))
    }

    pub fn apply(&mut self, grad: &[f64], lr: f64) -> Result<(), AgentError> {
        self.opt.step(self.net.params_mut(), grad, lr)?;
        Ok(())
    }

    pub fn forward(&self, obs: &[f64]) -> Vec<f64> {
        self.net.forward(obs).expect("observation width matches the network")
    }

    /// Drops the optimizer moments, keeping the weights.
    pub fn reset_optimizer(&mut self) {
        self.opt = Adam::new(self.net.n_params());
    }
}

/// Action distribution of a policy network.
pub fn policy_dist(policy: &Mlp, obs: &[f64]) -> Categorical {
    Categorical::from_logits(&policy.forward(obs).expect("observation width matches the network"))
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Running summary of the most recent update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub samples: usize,
}

pub trait Agent: Send {
    fn config(&self) -> &AgentConfig;

    /// Interacts with `runner` and learns until its step counter reaches `until`.
    fn train_until(&mut self, runner: &mut EpisodeRunner, until: u64) -> Result<LossStats, AgentError>;

    /// Evaluation action: a policy sample, or greedy on Q for value-based agents.
    fn act(&self, obs: &[f64], rng: &mut SimRng) -> usize;

    /// Most likely (or highest-valued) action.
    fn act_greedy(&self, obs: &[f64]) -> usize;

    /// Number of parameter updates applied so far.
    fn updates(&self) -> u64;

    fn checkpoint(&self) -> Checkpoint;

    /// Copies weights from `ck`; optimizer moments and buffers start fresh.
    fn load(&mut self, ck: &Checkpoint) -> Result<(), AgentError>;

    /// The policy network, for agents that have one.
    fn policy_mut(&mut self) -> Option<&mut Model>;
}

/// Builds the agent named by `cfg.algorithm`. All randomness (initial
/// weights, exploration, minibatch order) derives from `seed`.
pub fn make_agent(
    cfg: &AgentConfig,
    obs_dim: usize,
    n_actions: usize,
    seed: u64,
) -> Result<Box<dyn Agent>, AgentError> {
    cfg.validate()?;
    Ok(match cfg.algorithm {
        Algorithm::Reinforce | Algorithm::ReinforceBaseline => {
            Box::new(Reinforce::new(cfg.clone(), obs_dim, n_actions, seed)?)
        }
        Algorithm::ActorCritic => Box::new(ActorCritic::new(cfg.clone(), obs_dim, n_actions, seed)?),
        Algorithm::Ppo => Box::new(Ppo::new(cfg.clone(), obs_dim, n_actions, seed)?),
        Algorithm::Dqn => Box::new(Dqn::new(cfg.clone(), obs_dim, n_actions, seed)?),
    })
}

pub(crate) fn init_stream(seed: u64, name: &str) -> SimRng {
    rng::stream(seed, &[rng::label("init"), rng::label(name)])
}

pub(crate) fn agent_stream(seed: u64) -> SimRng {
    rng::stream(seed, &[rng::label("agent")])
}

pub(crate) fn checkpoint_tag(cfg: &AgentConfig) -> String {
    format!("{}/{}", cfg.algorithm, cfg.hash())
}

/// Replaces `model`'s weights with the checkpoint entry `name`.
pub(crate) fn load_model(ck: &Checkpoint, name: &str, model: &mut Model) -> Result<(), AgentError> {
    let entry = ck
        .model(name)
        .ok_or_else(|| AgentError::CheckpointMismatch(format!("missing model {name:?}")))?;
    if entry.net.sizes() != model.net.sizes() {
        return Err(AgentError::CheckpointMismatch(format!(
            "{name}: layer sizes {:?} vs {:?}",
            entry.net.sizes(),
            model.net.sizes()
        )));
    }
    *model = Model::new(entry.net.clone());
    Ok(())
}

/// Observation of every instance, alongside the actions a policy samples.
pub(crate) fn sample_actions(policy: &Mlp, obs: &[Vec<f64>], rng: &mut SimRng) -> Vec<(usize, f64)> {
    obs.iter()
        .map(|o| {
            let d = policy_dist(policy, o);
            let a = d.sample(rng);
            (a, d.log_prob(a))
        })
        .collect()
}

/// Encodes the state each instance actually reached in the last step.
pub(crate) fn next_observations(runner: &EpisodeRunner, batch: &crate::grid::StepBatch) -> Vec<Vec<f64>> {
    batch
        .next_states
        .iter()
        .zip(&batch.goals)
        .map(|(&s, &g)| {
            let mut o = vec![0.0; runner.obs_dim()];
            runner.encode_into(s, g, &mut o);
            o
        })
        .collect()
}

pub(crate) fn uniform_index(rng: &mut SimRng, n: usize) -> usize {
    rng.gen_range(0..n)
}
