use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::AgentError;
use crate::grid::EncodingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Reinforce,
    ReinforceBaseline,
    ActorCritic,
    Ppo,
    Dqn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Reinforce,
        Algorithm::ReinforceBaseline,
        Algorithm::ActorCritic,
        Algorithm::Ppo,
        Algorithm::Dqn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Reinforce => "reinforce",
            Algorithm::ReinforceBaseline => "reinforce-baseline",
            Algorithm::ActorCritic => "actor-critic",
            Algorithm::Ppo => "ppo",
            Algorithm::Dqn => "dqn",
        }
    }

    /// Whether evaluation samples from a policy (as opposed to acting greedily on Q).
    pub fn is_policy_gradient(self) -> bool {
        self != Algorithm::Dqn
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| AgentError::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip_range: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    /// Steps collected per environment between updates.
    pub rollout_length: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Replace the critic with a fresh random network before fine-tuning.
    pub reinit_critic: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_range: 0.2,
            gae_lambda: 0.95,
            epochs: 10,
            rollout_length: 1024,
            minibatch_size: 64,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            reinit_critic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DqnConfig {
    pub replay_capacity: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    /// Polyak weight of the online network in each target blend.
    pub target_tau: f64,
    pub target_interval: u64,
    pub seed_steps: usize,
    pub train_every: u64,
    pub gradient_steps: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        DqnConfig {
            replay_capacity: 1_000_000,
            eps_start: 1.0,
            eps_end: 0.01,
            eps_decay_steps: 100_000,
            target_tau: 0.95,
            target_interval: 1_000,
            seed_steps: 100,
            train_every: 4,
            gradient_steps: 1,
        }
    }
}

impl DqnConfig {
    /// Linear decay from `eps_start` to `eps_end`, flat afterwards.
    pub fn epsilon(&self, step: u64) -> f64 {
        if step >= self.eps_decay_steps {
            return self.eps_end;
        }
        let frac = step as f64 / self.eps_decay_steps as f64;
        self.eps_start + frac * (self.eps_end - self.eps_start)
    }
}

/// Hyperparameters of one agent. `defaults` follows the published tables;
/// `hidden = []` gives a linear model (a tabular softmax on one-hot inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub hidden: Vec<usize>,
    pub n_envs: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub entropy_coef: f64,
    /// Episodes per REINFORCE update, transitions per actor-critic or DQN update.
    pub batch_size: usize,
    pub encoding: EncodingKind,
    pub eval_episodes: usize,
    pub ppo: PpoConfig,
    pub dqn: DqnConfig,
}

impl AgentConfig {
    pub fn defaults(algorithm: Algorithm) -> Self {
        let base = AgentConfig {
            algorithm,
            gamma: 0.99,
            hidden: vec![256, 256],
            n_envs: 16,
            actor_lr: 1e-4,
            critic_lr: 3e-4,
            entropy_coef: 0.1,
            batch_size: 32,
            encoding: EncodingKind::OneHotPosition,
            eval_episodes: 5,
            ppo: PpoConfig::default(),
            dqn: DqnConfig::default(),
        };
        match algorithm {
            Algorithm::Reinforce | Algorithm::ReinforceBaseline => base,
            Algorithm::ActorCritic => AgentConfig {
                critic_lr: 1e-4,
                ..base
            },
            Algorithm::Ppo => AgentConfig {
                n_envs: 4,
                critic_lr: 1e-4,
                entropy_coef: 0.01,
                batch_size: 64,
                encoding: EncodingKind::Planes,
                eval_episodes: 25,
                ..base
            },
            Algorithm::Dqn => AgentConfig {
                n_envs: 1,
                actor_lr: 1e-4,
                critic_lr: 1e-4,
                entropy_coef: 0.0,
                encoding: EncodingKind::Planes,
                eval_episodes: 25,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let fail = |m: String| Err(AgentError::Config(m));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        for (name, lr) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail(format!("{name} must be positive, got {lr}"));
            }
        }
        if !(self.entropy_coef >= 0.0) {
            return fail(format!("entropy_coef must be >= 0, got {}", self.entropy_coef));
        }
        if self.n_envs == 0 || self.batch_size == 0 || self.eval_episodes == 0 {
            return fail("n_envs, batch_size and eval_episodes must be >= 1".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be >= 1".into());
        }
        let p = &self.ppo;
        if p.epochs == 0 || p.rollout_length == 0 || p.minibatch_size == 0 {
            return fail("ppo epochs, rollout_length and minibatch_size must be >= 1".into());
        }
        if !(p.clip_range > 0.0) || !(p.max_grad_norm > 0.0) || !(0.0..=1.0).contains(&p.gae_lambda) {
            return fail("ppo clip_range and max_grad_norm must be positive, gae_lambda in [0, 1]".into());
        }
        let d = &self.dqn;
        if d.replay_capacity == 0 || d.train_every == 0 || d.target_interval == 0 || d.eps_decay_steps == 0 {
            return fail("dqn capacities, intervals and decay steps must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&d.target_tau)
            || !(0.0..=1.0).contains(&d.eps_start)
            || !(0.0..=1.0).contains(&d.eps_end)
        {
            return fail("dqn tau and exploration rates must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Stable short hash used to tag checkpoints.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let r = AgentConfig::defaults(Algorithm::Reinforce);
        assert_eq!(
            (r.gamma, r.actor_lr, r.critic_lr, r.entropy_coef),
            (0.99, 1e-4, 3e-4, 0.1)
        );
        assert_eq!((r.n_envs, r.batch_size, r.hidden.clone()), (16, 32, vec![256, 256]));
        let ac = AgentConfig::defaults(Algorithm::ActorCritic);
        assert_eq!(ac.critic_lr, 1e-4);
        let ppo = AgentConfig::defaults(Algorithm::Ppo);
        assert_eq!((ppo.n_envs, ppo.batch_size, ppo.entropy_coef), (4, 64, 0.01));
        assert_eq!(ppo.ppo, PpoConfig::default());
        assert_eq!((ppo.ppo.epochs, ppo.ppo.rollout_length), (10, 1024));
        let dqn = AgentConfig::defaults(Algorithm::Dqn);
        assert_eq!((dqn.n_envs, dqn.batch_size, dqn.dqn.seed_steps), (1, 32, 100));
        for a in Algorithm::ALL {
            AgentConfig::defaults(a).validate().unwrap();
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }

    #[test]
    fn epsilon_schedule() {
        let d = DqnConfig::default();
        assert_eq!(d.epsilon(0), 1.0);
        assert!((d.epsilon(50_000) - 0.505).abs() < 1e-12);
        assert_eq!(d.epsilon(100_000), 0.01);
        assert_eq!(d.epsilon(5_000_000), 0.01);
        let mut last = f64::INFINITY;
        for s in (0..200_000).step_by(997) {
            assert!(d.epsilon(s) <= last);
            last = d.epsilon(s);
        }
    }

    #[test]
    fn validation_and_hash() {
        let mut c = AgentConfig::defaults(Algorithm::Ppo);
        assert_eq!(c.hash(), AgentConfig::defaults(Algorithm::Ppo).hash());
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        assert_ne!(c.hash(), AgentConfig::defaults(Algorithm::Ppo).hash());
    }
}
