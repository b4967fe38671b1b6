//! Scalar training losses and their exact parameter gradients.
//!
//! Every function returns `(loss, gradient)` over the flat parameter vector
//! of the network(s) involved, averaged over the batch, so the gradient can
//! be compared against finite differences of the loss.

use crate::nn::{Categorical, Mlp, Trace};

fn trace(net: &Mlp, obs: &[f64]) -> Trace {
    net.forward_trace(obs).expect("observation width matches the network")
}

fn backward(net: &Mlp, t: &Trace, dout: &[f64], grad: &mut [f64]) {
    net.backward(t, dout, grad).expect("gradient shapes match the network");
}

/// `-mean_i w_i log pi(a_i|o_i) - beta mean_i H(pi(.|o_i))`.
///
/// Covers the REINFORCE objective (`w = G - b`), the actor-critic actor
/// (`w = delta`) and behavior cloning (`w = 1`, `beta = 0`).
pub fn weighted_log_prob_loss(
    policy: &Mlp,
    obs: &[Vec<f64>],
    actions: &[usize],
    weights: &[f64],
    entropy_coef: f64,
) -> (f64, Vec<f64>) {
    let n = obs.len() as f64;
    let mut grad = vec![0.0; policy.n_params()];
    let mut loss = 0.0;
    for ((o, &a), &w) in obs.iter().zip(actions).zip(weights) {
        let t = trace(policy, o);
        let dist = Categorical::from_logits(t.output());
        loss -= (w * dist.log_prob(a) + entropy_coef * dist.entropy()) / n;
        let glp = dist.grad_log_prob(a);
        let gh = dist.grad_entropy();
        let dout: Vec<f64> = glp
            .iter()
            .zip(&gh)
            .map(|(lp, h)| -(w * lp + entropy_coef * h) / n)
            .collect();
        backward(policy, &t, &dout, &mut grad);
    }
    (loss, grad)
}

/// `mean_i (V(o_i) - y_i)^2`.
pub fn value_mse_loss(value: &Mlp, obs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = obs.len() as f64;
    let mut grad = vec![0.0; value.n_params()];
    let mut loss = 0.0;
    for (o, &y) in obs.iter().zip(targets) {
        let t = trace(value, o);
        let err = t.output()[0] - y;
        loss += err * err / n;
        backward(value, &t, &[2.0 * err / n], &mut grad);
    }
    (loss, grad)
}

/// `mean_i (Q(o_i, a_i) - y_i)^2`.
pub fn q_regression_loss(q: &Mlp, obs: &[Vec<f64>], actions: &[usize], targets: &[f64]) -> (f64, Vec<f64>) {
    let n = obs.len() as f64;
    let mut grad = vec![0.0; q.n_params()];
    let mut loss = 0.0;
    let mut dout = vec![0.0; q.output_dim()];
    for ((o, &a), &y) in obs.iter().zip(actions).zip(targets) {
        let t = trace(q, o);
        let err = t.output()[a] - y;
        loss += err * err / n;
        dout.fill(0.0);
        dout[a] = 2.0 * err / n;
        backward(q, &t, &dout, &mut grad);
    }
    (loss, grad)
}

/// One PPO minibatch.
#[derive(Debug, Clone, Copy)]
pub struct PpoBatch<'a> {
    pub obs: &'a [Vec<f64>],
    pub actions: &'a [usize],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
    pub returns: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpoLossParts {
    /// Mean clipped surrogate (to be maximized).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// Fraction of samples whose ratio left the clip range.
    pub clip_fraction: f64,
}

/// `-surrogate + value_coef * mean (V - R)^2 - entropy_coef * mean H` with
/// surrogate `mean min(r A, clip(r, 1 - eps, 1 + eps) A)`.
///
/// Returns the loss, the policy gradient, the value gradient and the parts.
pub fn ppo_loss(
    policy: &Mlp,
    value: &Mlp,
    batch: PpoBatch<'_>,
    clip_range: f64,
    value_coef: f64,
    entropy_coef: f64,
) -> (f64, Vec<f64>, Vec<f64>, PpoLossParts) {
    let n = batch.obs.len() as f64;
    let mut gp = vec![0.0; policy.n_params()];
    let mut gv = vec![0.0; value.n_params()];
    let mut parts = PpoLossParts::default();
    for i in 0..batch.obs.len() {
        let (o, a, adv) = (&batch.obs[i], batch.actions[i], batch.advantages[i]);
        let t = trace(policy, o);
        let dist = Categorical::from_logits(t.output());
        let ratio = (dist.log_prob(a) - batch.old_log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - clip_range, 1.0 + clip_range);
        // min picks the unclipped branch unless clipping lowers the objective
        let unclipped_active = ratio * adv <= clipped * adv;
        parts.surrogate += (ratio * adv).min(clipped * adv) / n;
        if clipped != ratio {
            parts.clip_fraction += 1.0 / n;
        }
        let h = dist.entropy();
        parts.entropy += h / n;
        // d(r A)/dlogits = A r dlogp/dlogits; the clipped branch is flat
        let coef = if unclipped_active { adv * ratio } else { 0.0 };
        let glp = dist.grad_log_prob(a);
        let gh = dist.grad_entropy();
        let dout: Vec<f64> = glp
            .iter()
            .zip(&gh)
            .map(|(lp, gh)| -(coef * lp + entropy_coef * gh) / n)
            .collect();
        backward(policy, &t, &dout, &mut gp);

        let tv = trace(value, o);
        let err = tv.output()[0] - batch.returns[i];
        parts.value_loss += err * err / n;
        backward(value, &tv, &[value_coef * 2.0 * err / n], &mut gv);
    }
    let loss = -parts.surrogate + value_coef * parts.value_loss - entropy_coef * parts.entropy;
    (loss, gp, gv, parts)
}
