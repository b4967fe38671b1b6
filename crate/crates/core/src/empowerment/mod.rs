//! Channel capacity and empowerment.
//!
//! Empowerment of a state is the capacity of the channel from open-loop
//! action sequences to the state reached after them. Values are in bits.
//! Deterministic MDPs use the reachable-set shortcut; stochastic MDPs run
//! Blahut-Arimoto on the composed channel.

mod capacity;
mod channel;
mod horizon;
mod map;

use thiserror::Error;

pub use capacity::{
    blahut_arimoto, deterministic_capacity, kkt_certificate, kl_divergence_bits, mutual_information_bits,
    BlahutArimoto, CapacityResult, KktReport, DEFAULT_MAX_ITER, DEFAULT_TOL_BITS,
};
pub use channel::Channel;
pub use horizon::{HorizonSpec, DEFAULT_HORIZON, DEFAULT_K_MAX, DEFAULT_LAMBDA};
pub use map::{
    capacity_achieving_policies, compose_n_step_channel, discounted_empowerment, empowerment_map, n_step_empowerment,
    reachable_count, state_empowerment, EmpowermentMap, EmpowermentOptions, DEFAULT_SEQUENCE_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmpowermentError {
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),
    #[error("channel is not deterministic")]
    NotDeterministic,
    #[error("reachable-set counting needs a deterministic MDP")]
    StochasticMdp,
    #[error("sequences of length {length} exceed the enumeration budget of {budget}")]
    BudgetExceeded { length: usize, budget: usize },
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
}
