use super::losses::{value_mse_loss, weighted_log_prob_loss};
use super::returns::td_error;
use super::{
    agent_stream, checkpoint_tag, init_stream, load_model, next_observations, policy_dist, sample_actions, Agent,
    AgentConfig, AgentError, LossStats, Model, Transition,
};
use crate::grid::EpisodeRunner;
use crate::nn::Checkpoint;
use crate::rng::SimRng;

/// One-step TD actor-critic update on a batch of transitions.
///
/// `delta = r + gamma V(s') - V(s)` with both values taken before the update;
/// truncated steps bootstrap. The actor minimizes `-delta log pi`, the
/// critic regresses `V(s)` onto the fixed target `r + gamma V(s')`.
pub fn ac_td_update(
    policy: &mut Model,
    value: &mut Model,
    transitions: &[Transition],
    cfg: &AgentConfig,
) -> Result<LossStats, AgentError> {
    if transitions.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let n = transitions.len();
    let mut obs = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    let mut deltas = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for t in transitions {
        let v = value.forward(&t.obs)[0];
        let next_v = value.forward(&t.next_obs)[0];
        let delta = td_error(t.reward, v, next_v, false, cfg.gamma);
        obs.push(t.obs.clone());
        actions.push(t.action);
        deltas.push(delta);
        targets.push(v + delta);
    }
    let (ploss, pgrad) = weighted_log_prob_loss(&policy.net, &obs, &actions, &deltas, cfg.entropy_coef);
    let (vloss, vgrad) = value_mse_loss(&value.net, &obs, &targets);
    let entropy = obs.iter().map(|o| policy_dist(&policy.net, o).entropy()).sum::<f64>() / n as f64;
    policy.apply(&pgrad, cfg.actor_lr)?;
    value.apply(&vgrad, cfg.critic_lr)?;
    Ok(LossStats {
        policy_loss: ploss,
        value_loss: vloss,
        entropy,
        samples: n,
    })
}

pub struct ActorCritic {
    cfg: AgentConfig,
    policy: Model,
    value: Model,
    rng: SimRng,
    pending: Vec<Transition>,
    updates: u64,
}

impl ActorCritic {
    pub fn new(cfg: AgentConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self, AgentError> {
        Ok(ActorCritic {
            policy: Model::init(obs_dim, &cfg.hidden, n_actions, &mut init_stream(seed, "policy"))?,
            value: Model::init(obs_dim, &cfg.hidden, 1, &mut init_stream(seed, "value"))?,
            rng: agent_stream(seed),
            pending: Vec::new(),
            updates: 0,
            cfg,
        })
    }
}

impl Agent for ActorCritic {
    fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    fn train_until(&mut self, runner: &mut EpisodeRunner, until: u64) -> Result<LossStats, AgentError> {
        let mut stats = LossStats::default();
        while runner.step_counter() < until {
            let obs = runner.observations();
            let sampled = sample_actions(&self.policy.net, &obs, &mut self.rng);
            let acts: Vec<usize> = sampled.iter().map(|(a, _)| *a).collect();
            let batch = runner.step(&acts)?;
            let next = next_observations(runner, &batch);
            for (i, (o, no)) in obs.into_iter().zip(next).enumerate() {
                self.pending.push(Transition {
                    obs: o,
                    action: acts[i],
                    reward: batch.rewards[i],
                    next_obs: no,
                    log_prob: sampled[i].1,
                    value: 0.0,
                    truncated: batch.truncated[i],
                });
            }
            if self.pending.len() >= self.cfg.batch_size {
                let batch = std::mem::take(&mut self.pending);
                stats = ac_td_update(&mut self.policy, &mut self.value, &batch, &self.cfg)?;
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
        Checkpoint::new(checkpoint_tag(&self.cfg))
            .with("policy", &self.policy.net, &self.policy.opt)
            .with("value", &self.value.net, &self.value.opt)
    }

    fn load(&mut self, ck: &Checkpoint) -> Result<(), AgentError> {
        load_model(ck, "policy", &mut self.policy)?;
        load_model(ck, "value", &mut self.value)?;
        self.pending.clear();
        Ok(())
    }

    fn policy_mut(&mut self) -> Option<&mut Model> {
        Some(&mut self.policy)
    }
}
