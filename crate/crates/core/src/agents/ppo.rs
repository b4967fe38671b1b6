use rand::seq::SliceRandom;

use super::losses::{ppo_loss, PpoBatch};
use super::returns::{gae, normalize};
use super::{
    agent_stream, checkpoint_tag, init_stream, load_model, next_observations, policy_dist, sample_actions, Agent,
    AgentConfig, AgentError, LossStats, Model, RolloutBuffer, Transition,
};
use crate::grid::EpisodeRunner;
use crate::nn::{clip_global_norm, Checkpoint};
use crate::rng::SimRng;

/// Clipped-surrogate update over one rollout: GAE targets, optional
/// advantage normalization, then `epochs` passes of shuffled minibatches
/// with a joint gradient-norm clip over policy and critic.
pub fn ppo_update(
    policy: &mut Model,
    value: &mut Model,
    buffer: &mut RolloutBuffer,
    policy_version: u64,
    cfg: &AgentConfig,
    rng: &mut SimRng,
) -> Result<LossStats, AgentError> {
    let p = &cfg.ppo;
    let envs = buffer.consume(policy_version)?;
    let mut obs = Vec::new();
    let mut actions = Vec::new();
    let mut old_log_probs = Vec::new();
    let mut advantages = Vec::new();
    let mut returns = Vec::new();
    for seq in envs {
        let rewards: Vec<f64> = seq.iter().map(|t| t.reward).collect();
        let values: Vec<f64> = seq.iter().map(|t| t.value).collect();
        let next_values: Vec<f64> = seq.iter().map(|t| value.forward(&t.next_obs)[0]).collect();
        let boundary: Vec<bool> = seq.iter().map(|t| t.truncated).collect();
        let terminal = vec![false; seq.len()];
        let g = gae(
            &rewards,
            &values,
            &next_values,
            &terminal,
            &boundary,
            cfg.gamma,
            p.gae_lambda,
        )?;
        for t in seq {
            obs.push(t.obs.clone());
            actions.push(t.action);
            old_log_probs.push(t.log_prob);
        }
        advantages.extend(g.advantages);
        returns.extend(g.returns);
    }
    if p.normalize_advantages {
        normalize(&mut advantages);
    }
    let n = obs.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = LossStats::default();
    for _ in 0..p.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(p.minibatch_size) {
            let pick = |v: &[f64]| chunk.iter().map(|&i| v[i]).collect::<Vec<f64>>();
            let mb_obs: Vec<Vec<f64>> = chunk.iter().map(|&i| obs[i].clone()).collect();
            let mb_actions: Vec<usize> = chunk.iter().map(|&i| actions[i]).collect();
            let (old, adv, ret) = (pick(&old_log_probs), pick(&advantages), pick(&returns));
            let batch = PpoBatch {
                obs: &mb_obs,
                actions: &mb_actions,
                old_log_probs: &old,
                advantages: &adv,
                returns: &ret,
            };
            let (loss, mut gp, mut gv, parts) = ppo_loss(
                &policy.net,
                &value.net,
                batch,
                p.clip_range,
                p.value_coef,
                cfg.entropy_coef,
            );
            clip_global_norm(&mut [&mut gp, &mut gv], p.max_grad_norm);
            policy.apply(&gp, cfg.actor_lr)?;
            value.apply(&gv, cfg.critic_lr)?;
            stats = LossStats {
                policy_loss: loss,
                value_loss: parts.value_loss,
                entropy: parts.entropy,
                samples: chunk.len(),
            };
        }
    }
    Ok(stats)
}

pub struct Ppo {
    cfg: AgentConfig,
    policy: Model,
    value: Model,
    rng: SimRng,
    buffer: RolloutBuffer,
    version: u64,
    seed: u64,
    obs_dim: usize,
}

impl Ppo {
    pub fn new(cfg: AgentConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self, AgentError> {
        Ok(Ppo {
            policy: Model::init(obs_dim, &cfg.hidden, n_actions, &mut init_stream(seed, "policy"))?,
            value: Model::init(obs_dim, &cfg.hidden, 1, &mut init_stream(seed, "value"))?,
            rng: agent_stream(seed),
            buffer: RolloutBuffer::new(cfg.n_envs, 0),
            version: 0,
            cfg,
            seed,
            obs_dim,
        })
    }
}

impl Agent for Ppo {
    fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    fn train_until(&mut self, runner: &mut EpisodeRunner, until: u64) -> Result<LossStats, AgentError> {
        let mut stats = LossStats::default();
        if self.buffer.n_envs() != runner.n_envs() {
            self.buffer = RolloutBuffer::new(runner.n_envs(), self.version);
        }
        while runner.step_counter() < until {
            let obs = runner.observations();
            let sampled = sample_actions(&self.policy.net, &obs, &mut self.rng);
            let acts: Vec<usize> = sampled.iter().map(|(a, _)| *a).collect();
            let batch = runner.step(&acts)?;
            let next = next_observations(runner, &batch);
            for (i, (o, no)) in obs.into_iter().zip(next).enumerate() {
                let value = self.value.forward(&o)[0];
                self.buffer.push(
                    i,
                    Transition {
                        obs: o,
                        action: acts[i],
                        reward: batch.rewards[i],
                        next_obs: no,
                        log_prob: sampled[i].1,
                        value,
                        truncated: batch.truncated[i],
                    },
                );
            }
            if self.buffer.len() >= self.cfg.ppo.rollout_length {
                stats = ppo_update(
                    &mut self.policy,
                    &mut self.value,
                    &mut self.buffer,
                    self.version,
                    &self.cfg,
                    &mut self.rng,
                )?;
                self.version += 1;
                self.buffer = RolloutBuffer::new(runner.n_envs(), self.version);
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
        self.version
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(checkpoint_tag(&self.cfg))
            .with("policy", &self.policy.net, &self.policy.opt)
            .with("value", &self.value.net, &self.value.opt)
    }

    fn load(&mut self, ck: &Checkpoint) -> Result<(), AgentError> {
        load_model(ck, "policy", &mut self.policy)?;
        if self.cfg.ppo.reinit_critic {
            let n_out = 1;
            self.value = Model::init(
                self.obs_dim,
                &self.cfg.hidden,
                n_out,
                &mut init_stream(self.seed, "value-reinit"),
            )?;
        } else {
            load_model(ck, "value", &mut self.value)?;
        }
        self.buffer = RolloutBuffer::new(self.cfg.n_envs, self.version);
        Ok(())
    }

    fn policy_mut(&mut self) -> Option<&mut Model> {
        Some(&mut self.policy)
    }
}
