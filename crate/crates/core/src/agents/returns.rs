//! Discounted returns, TD errors and generalized advantage estimation.

use super::AgentError;

/// Discounted reward-to-go `G_t = sum_k gamma^k r_{t+k}` within one episode.
pub fn rewards_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        out[t] = acc;
    }
    out
}

/// `r + gamma V(s') (1 - terminal) - V(s)`. Time-limit truncation is not
/// terminal, so truncated steps still bootstrap from `V(s')`.
pub fn td_error(reward: f64, value: f64, next_value: f64, terminal: bool, gamma: f64) -> f64 {
    let bootstrap = if terminal { 0.0 } else { gamma * next_value };
    reward + bootstrap - value
}

/// Advantages and return targets for one environment's step sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Gae {
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Backward GAE recursion `A_t = delta_t + gamma lambda A_{t+1}`, cut at
/// episode boundaries (`boundary[t]` set on the last step of an episode).
///
/// `next_values[t]` is the value of the state actually reached at step `t`,
/// which at a truncation differs from the first state of the next episode.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminal: &[bool],
    boundary: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<Gae, AgentError> {
    let n = rewards.len();
    if [values.len(), next_values.len(), terminal.len(), boundary.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(AgentError::LengthMismatch);
    }
    let mut advantages = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let delta = td_error(rewards[t], values[t], next_values[t], terminal[t], gamma);
        let carry = if boundary[t] || terminal[t] { 0.0 } else { next_adv };
        advantages[t] = delta + gamma * lambda * carry;
        next_adv = advantages[t];
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok(Gae { advantages, returns })
}

/// Shifts and scales to mean 0 and standard deviation 1 (population std, plus 1e-8).
pub fn normalize(values: &mut [f64]) {
    if values.is_empty() {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    values.iter_mut().for_each(|v| *v = (*v - mean) * scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_to_go() {
        assert_eq!(rewards_to_go(&[1.0, 0.0, 2.0], 0.5), vec![1.5, 1.0, 2.0]);
    }

    #[test]
    fn td_error_cases() {
        assert_eq!(td_error(1.0, 0.0, 0.0, false, 0.99), 1.0);
        // truncated step bootstraps
        assert_eq!(td_error(0.5, 0.0, 2.0, false, 0.5), 1.5);
        assert_eq!(td_error(0.5, 0.0, 2.0, true, 0.5), 0.5);
    }

    #[test]
    fn lambda_zero_gives_td_errors_and_one_gives_returns() {
        let r = [0.0, 1.0, 0.0, 1.0];
        let v = [0.3, -0.2, 0.5, 0.1];
        let nv = [-0.2, 0.5, 0.1, 0.7];
        let f = [false; 4];
        let g = gae(&r, &v, &nv, &f, &f, 0.9, 0.0).unwrap();
        for t in 0..4 {
            assert!((g.advantages[t] - td_error(r[t], v[t], nv[t], false, 0.9)).abs() < 1e-15);
        }
        let zeros = [0.0; 4];
        let mut boundary = [false; 4];
        boundary[3] = true;
        let g = gae(&r, &zeros, &zeros, &f, &boundary, 0.9, 1.0).unwrap();
        assert_eq!(g.advantages, rewards_to_go(&r, 0.9));
        assert!(gae(&r, &v, &nv[..3], &f, &f, 0.9, 0.5).is_err());
    }

    #[test]
    fn normalization() {
        let mut a = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut a);
        assert!(a.iter().sum::<f64>().abs() < 1e-12);
        let var = a.iter().map(|v| v * v).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-6);
    }
}
