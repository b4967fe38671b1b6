use super::losses::{value_mse_loss, weighted_log_prob_loss};
use super::returns::rewards_to_go;
use super::{
    agent_stream, checkpoint_tag, init_stream, load_model, policy_dist, sample_actions, Agent, AgentConfig, AgentError,
    Algorithm, LossStats, Model,
};
use crate::grid::EpisodeRunner;
use crate::nn::Checkpoint;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStep {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

/// One Monte-Carlo policy-gradient step over complete episodes.
///
/// With a baseline the policy weights are `G_t - b(s_t)` and the baseline is
/// regressed onto `G_t` at `critic_lr`; without one the weights are `G_t`.
pub fn reinforce_update(
    policy: &mut Model,
    baseline: Option<&mut Model>,
    episodes: &[Vec<EpisodeStep>],
    cfg: &AgentConfig,
) -> Result<LossStats, AgentError> {
    let n: usize = episodes.iter().map(Vec::len).sum();
    if n == 0 {
        return Err(AgentError::EmptyBatch);
    }
    let mut obs = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut returns = Vec::with_capacity(n);
    for ep in episodes {
        let rewards: Vec<f64> = ep.iter().map(|s| s.reward).collect();
        returns.extend(rewards_to_go(&rewards, cfg.gamma));
        for s in ep {
            obs.push(s.obs.clone());
            actions.push(s.action);
        }
    }
    let mut stats = LossStats {
        samples: n,
        ..Default::default()
    };
    let weights: Vec<f64> = match &baseline {
        Some(b) => obs.iter().zip(&returns).map(|(o, g)| g - b.forward(o)[0]).collect(),
        None => returns.clone(),
    };
    let (loss, grad) = weighted_log_prob_loss(&policy.net, &obs, &actions, &weights, cfg.entropy_coef);
    stats.policy_loss = loss;
    stats.entropy = obs.iter().map(|o| policy_dist(&policy.net, o).entropy()).sum::<f64>() / n as f64;
    policy.apply(&grad, cfg.actor_lr)?;
    if let Some(b) = baseline {
        let (vloss, vgrad) = value_mse_loss(&b.net, &obs, &returns);
        stats.value_loss = vloss;
        b.apply(&vgrad, cfg.critic_lr)?;
    }
    Ok(stats)
}

/// REINFORCE, optionally with a learned state-value baseline.
pub struct Reinforce {
    cfg: AgentConfig,
    policy: Model,
    baseline: Option<Model>,
    rng: SimRng,
    open: Vec<Vec<EpisodeStep>>,
    done: Vec<Vec<EpisodeStep>>,
    updates: u64,
}

impl Reinforce {
    pub fn new(cfg: AgentConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self, AgentError> {
        let policy = Model::init(obs_dim, &cfg.hidden, n_actions, &mut init_stream(seed, "policy"))?;
        let baseline = match cfg.algorithm {
            Algorithm::ReinforceBaseline => {
                Some(Model::init(obs_dim, &cfg.hidden, 1, &mut init_stream(seed, "value"))?)
            }
            _ => None,
        };
        Ok(Reinforce {
            open: Vec::new(),
            done: Vec::new(),
            rng: agent_stream(seed),
            cfg,
            policy,
            baseline,
            updates: 0,
        })
    }
}

impl Agent for Reinforce {
    fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    fn train_until(&mut self, runner: &mut EpisodeRunner, until: u64) -> Result<LossStats, AgentError> {
        let mut stats = LossStats::default();
        self.open.resize_with(runner.n_envs(), Vec::new);
        while runner.step_counter() < until {
            let obs = runner.observations();
            let acts: Vec<usize> = sample_actions(&self.policy.net, &obs, &mut self.rng)
                .into_iter()
                .map(|(a, _)| a)
                .collect();
            let batch = runner.step(&acts)?;
            for (i, o) in obs.into_iter().enumerate() {
                self.open[i].push(EpisodeStep {
                    obs: o,
                    action: acts[i],
                    reward: batch.rewards[i],
                });
                if batch.truncated[i] {
                    self.done.push(std::mem::take(&mut self.open[i]));
                }
            }
            if self.done.len() >= self.cfg.batch_size {
                let episodes = std::mem::take(&mut self.done);
                stats = reinforce_update(&mut self.policy, self.baseline.as_mut(), &episodes, &self.cfg)?;
                self.updates += 1;
            }
        }
        Ok(stats)
    }

    fn act(&self, obs: &[f64], rng: &mut SimRng) -> usize {
        policy_dist(&self.policy.net, obs).sample(rng)
    }

    fn act_greedy(&self, obs: &[f64]) -> usize {
        policy_dist(&self.policy.net, obs).mode()
    }

    fn updates(&self) -> u64 {
        self.updates
    }

    fn checkpoint(&self) -> Checkpoint {
        let ck = Checkpoint::new(checkpoint_tag(&self.cfg)).with("policy", &self.policy.net, &self.policy.opt);
        match &self.baseline {
            Some(b) => ck.with("value", &b.net, &b.opt),
            None => ck,
        }
    }

    fn load(&mut self, ck: &Checkpoint) -> Result<(), AgentError> {
        load_model(ck, "policy", &mut self.policy)?;
        if let Some(b) = &mut self.baseline {
            load_model(ck, "value", b)?;
        }
        self.open.clear();
        self.done.clear();
        Ok(())
    }

    fn policy_mut(&mut self) -> Option<&mut Model> {
        Some(&mut self.policy)
    }
}
