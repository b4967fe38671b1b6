//! Empowerment over tabular gridworlds and empowerment-based pre-training
//! of reinforcement-learning agents.
//!
//! - [`grid`]: layouts, transition models, encodings and the episode runner.
//! - [`empowerment`]: channel capacity and one-step, n-step and discounted empowerment maps.
//! - [`nn`]: a small MLP stack with manual backprop and Adam.
//! - [`agents`]: REINFORCE (with and without baseline), actor-critic, PPO, DQN and behavior cloning.
//! - [`pipeline`]: pre-training, fine-tuning, evaluation, sweeps and metrics.

pub mod agents;
pub mod empowerment;
pub mod grid;
pub mod nn;
pub mod pipeline;
pub mod rng;
