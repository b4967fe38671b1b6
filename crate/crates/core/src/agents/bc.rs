use rand::Rng;

use super::losses::weighted_log_prob_loss;
use super::{policy_dist, AgentError, LossStats, Model};
use crate::rng::{sample_dense, SimRng};

#[derive(Debug, Clone, PartialEq)]
pub struct BcConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for BcConfig {
    fn default() -> Self {
        BcConfig {
            steps: 2_000,
            batch_size: 256,
            lr: 1e-2,
        }
    }
}

/// `0.5 sum |p - q|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Fits the policy to per-state action distributions by cross-entropy on
/// sampled actions: each step draws states uniformly, draws one action per
/// state from its target and takes one Adam step.
///
/// `observations[s]` is the policy input for state `s`.
pub fn behavior_clone(
    policy: &mut Model,
    observations: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &BcConfig,
    rng: &mut SimRng,
) -> Result<LossStats, AgentError> {
    if observations.is_empty() || cfg.batch_size == 0 {
        return Err(AgentError::EmptyBatch);
    }
    if targets.len() < observations.len() {
        return Err(AgentError::MissingTarget(targets.len()));
    }
    let mut stats = LossStats::default();
    for _ in 0..cfg.steps {
        let mut obs = Vec::with_capacity(cfg.batch_size);
        let mut actions = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            let s = rng.gen_range(0..observations.len());
            obs.push(observations[s].clone());
            actions.push(sample_dense(&targets[s], rng.gen::<f64>()));
        }
        let ones = vec![1.0; obs.len()];
        let (loss, grad) = weighted_log_prob_loss(&policy.net, &obs, &actions, &ones, 0.0);
        policy.apply(&grad, cfg.lr)?;
        stats.policy_loss = loss;
        stats.samples = obs.len();
    }
    stats.entropy = observations
        .iter()
        .map(|o| policy_dist(&policy.net, o).entropy())
        .sum::<f64>()
        / observations.len() as f64;
    Ok(stats)
}
