use rand::Rng;

use super::losses::q_regression_loss;
use super::{
    agent_stream, argmax, checkpoint_tag, init_stream, load_model, uniform_index, Agent, AgentConfig, AgentError,
    LossStats, Model, ReplayBuffer, ReplayEntry,
};
use crate::grid::EpisodeRunner;
use crate::nn::{Checkpoint, Mlp};
use crate::rng::SimRng;

/// One Q-regression step on a uniform replay sample with targets
/// `r + gamma (1 - terminal) max_a Q_target(s', a)`; truncation bootstraps.
pub fn dqn_update(
    q: &mut Model,
    target: &Mlp,
    replay: &ReplayBuffer,
    encode: &dyn Fn(usize, Option<usize>) -> Vec<f64>,
    cfg: &AgentConfig,
    rng: &mut SimRng,
) -> Result<LossStats, AgentError> {
    let need = cfg.dqn.seed_steps.max(1);
    if replay.len() < need {
        return Err(AgentError::InsufficientReplay {
            have: replay.len(),
            need,
        });
    }
    let sample = replay.sample(cfg.batch_size, rng)?;
    let mut obs = Vec::with_capacity(sample.len());
    let mut actions = Vec::with_capacity(sample.len());
    let mut targets = Vec::with_capacity(sample.len());
    for e in &sample {
        let bootstrap = if e.terminal {
            0.0
        } else {
            let next = target
                .forward(&encode(e.next_state, e.goal))
                .expect("observation width");
            next.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        };
        obs.push(encode(e.state, e.goal));
        actions.push(e.action);
        targets.push(e.reward + cfg.gamma * bootstrap);
    }
    let (loss, grad) = q_regression_loss(&q.net, &obs, &actions, &targets);
    q.apply(&grad, cfg.critic_lr)?;
    Ok(LossStats {
        value_loss: loss,
        samples: sample.len(),
        ..Default::default()
    })
}

/// `target <- tau online + (1 - tau) target`.
pub(crate) fn polyak(target: &mut Mlp, online: &Mlp, tau: f64) {
    for (t, o) in target.params_mut().iter_mut().zip(online.params()) {
        *t = tau * o + (1.0 - tau) * *t;
    }
}

pub struct Dqn {
    cfg: AgentConfig,
    q: Model,
    target: Mlp,
    replay: ReplayBuffer,
    rng: SimRng,
    /// Environment steps taken by this agent (drives the exploration schedule).
    steps: u64,
    updates: u64,
}

impl Dqn {
    pub fn new(cfg: AgentConfig, obs_dim: usize, n_actions: usize, seed: u64) -> Result<Self, AgentError> {
        let q = Model::init(obs_dim, &cfg.hidden, n_actions, &mut init_stream(seed, "q"))?;
        Ok(Dqn {
            target: q.net.clone(),
            q,
            replay: ReplayBuffer::new(cfg.dqn.replay_capacity),
            rng: agent_stream(seed),
            steps: 0,
            updates: 0,
            cfg,
        })
    }

    pub fn q_values(&self, obs: &[f64]) -> Vec<f64> {
        self.q.forward(obs)
    }
}

impl Agent for Dqn {
    fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    fn train_until(&mut self, runner: &mut EpisodeRunner, until: u64) -> Result<LossStats, AgentError> {
        let mut stats = LossStats::default();
        let n_actions = runner.mdp().n_actions();
        let dq = self.cfg.dqn.clone();
        while runner.step_counter() < until {
            let eps = dq.epsilon(self.steps);
            let obs = runner.observations();
            let acts: Vec<usize> = obs
                .iter()
                .map(|o| {
                    if self.rng.gen::<f64>() < eps {
                        uniform_index(&mut self.rng, n_actions)
                    } else {
                        argmax(&self.q.forward(o))
                    }
                })
                .collect();
            let batch = runner.step(&acts)?;
            for i in 0..acts.len() {
                self.replay.push(ReplayEntry {
                    state: batch.states[i],
                    goal: batch.goals[i],
                    action: acts[i],
                    reward: batch.rewards[i],
                    next_state: batch.next_states[i],
                    terminal: false,
                    truncated: batch.truncated[i],
                });
                self.steps += 1;
                if self.steps.is_multiple_of(dq.train_every) && self.replay.len() >= dq.seed_steps.max(1) {
                    let encode = |s: usize, g: Option<usize>| {
                        let mut o = vec![0.0; runner.obs_dim()];
                        runner.encode_into(s, g, &mut o);
                        o
                    };
                    for _ in 0..dq.gradient_steps {
                        stats = dqn_update(
                            &mut self.q,
                            &self.target,
                            &self.replay,
                            &encode,
                            &self.cfg,
                            &mut self.rng,
                        )?;
                        self.updates += 1;
                    }
                }
                if self.steps.is_multiple_of(dq.target_interval) {
                    polyak(&mut self.target, &self.q.net, dq.target_tau);
                }
            }
        }
        Ok(stats)
    }

    fn act(&self, obs: &[f64], _rng: &mut SimRng) -> usize {
        argmax(&self.q.forward(obs))
    }

    fn act_greedy(&self, obs: &[f64]) -> usize {
        argmax(&self.q.forward(obs))
    }

    fn updates(&self) -> u64 {
        self.updates
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(checkpoint_tag(&self.cfg))
            .with("q", &self.q.net, &self.q.opt)
            .with("q_target", &self.target, &crate::nn::Adam::new(self.target.n_params()))
    }

    fn load(&mut self, ck: &Checkpoint) -> Result<(), AgentError> {
        load_model(ck, "q", &mut self.q)?;
        let mut target = Model::new(self.target.clone());
        load_model(ck, "q_target", &mut target)?;
        self.target = target.net;
        self.replay = ReplayBuffer::new(self.cfg.dqn.replay_capacity);
        self.steps = 0;
        Ok(())
    }

    fn policy_mut(&mut self) -> Option<&mut Model> {
        None
    }
}
