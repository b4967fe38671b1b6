//! Experience storage: on-policy rollouts and the DQN replay ring.

use rand::Rng;

use super::AgentError;

/// One environment step as seen by an on-policy learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Observation of the state actually reached, before any reset.
    pub next_obs: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub truncated: bool,
}

/// Rectangular `n_envs x T` block of on-policy experience.
///
/// A buffer records the policy version it was collected with and can be
/// consumed once; feeding it to a second update is an error.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    n_envs: usize,
    steps: Vec<Vec<Transition>>,
    policy_version: u64,
    consumed: bool,
}

impl RolloutBuffer {
    pub fn new(n_envs: usize, policy_version: u64) -> Self {
        RolloutBuffer {
            n_envs,
            steps: vec![Vec::new(); n_envs],
            policy_version,
            consumed: false,
        }
    }

    pub fn push(&mut self, env: usize, t: Transition) {
        self.steps[env].push(t);
    }

    pub fn n_envs(&self) -> usize {
        self.n_envs
    }

    /// Steps per environment; the buffer is kept rectangular.
    pub fn len(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn policy_version(&self) -> u64 {
        self.policy_version
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Hands out the per-environment sequences exactly once.
    pub fn consume(&mut self, current_version: u64) -> Result<&[Vec<Transition>], AgentError> {
        if self.consumed || self.policy_version != current_version {
            return Err(AgentError::StaleBuffer);
        }
        if self.is_empty() || self.steps.iter().any(|s| s.len() != self.len()) {
            return Err(AgentError::EmptyBatch);
        }
        self.consumed = true;
        Ok(&self.steps)
    }
}

/// Replay entry. States are stored as indices and encoded when sampled,
/// which keeps a million-entry buffer small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayEntry {
    pub state: usize,
    pub goal: Option<usize>,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    pub terminal: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: Vec<ReplayEntry>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            entries: Vec::with_capacity(capacity.min(1 << 16)),
            next: 0,
        }
    }

    pub fn push(&mut self, e: ReplayEntry) {
        if self.entries.len() < self.capacity {
            self.entries.push(e);
        } else {
            self.entries[self.next] = e;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<ReplayEntry>, AgentError> {
        if self.entries.is_empty() {
            return Err(AgentError::InsufficientReplay { have: 0, need: n });
        }
        Ok((0..n)
            .map(|_| self.entries[rng.gen_range(0..self.entries.len())])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn entry(state: usize) -> ReplayEntry {
        ReplayEntry {
            state,
            goal: None,
            action: 0,
            reward: 0.0,
            next_state: state,
            terminal: false,
            truncated: false,
        }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3);
        for s in 0..5 {
            b.push(entry(s));
        }
        assert_eq!(b.len(), 3);
        let mut states: Vec<usize> = b.entries.iter().map(|e| e.state).collect();
        states.sort();
        assert_eq!(states, vec![2, 3, 4]);
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let mut b = ReplayBuffer::new(4);
        for s in 0..4 {
            b.push(entry(s));
        }
        let mut rng = stream(3, &[]);
        let mut counts = [0usize; 4];
        for e in b.sample(40_000, &mut rng).unwrap() {
            counts[e.state] += 1;
        }
        let sigma = (40_000.0f64 * 0.25 * 0.75).sqrt();
        assert!(counts.iter().all(|c| (*c as f64 - 10_000.0).abs() < 4.0 * sigma));
        assert!(ReplayBuffer::new(2).sample(1, &mut rng).is_err());
    }

    #[test]
    fn rollout_consumed_once() {
        let mut b = RolloutBuffer::new(1, 7);
        b.push(
            0,
            Transition {
                obs: vec![1.0],
                action: 0,
                reward: 0.0,
                next_obs: vec![1.0],
                log_prob: 0.0,
                value: 0.0,
                truncated: false,
            },
        );
        assert_eq!(b.consume(8).unwrap_err(), AgentError::StaleBuffer);
        assert!(b.consume(7).is_ok());
        assert_eq!(b.consume(7).unwrap_err(), AgentError::StaleBuffer);
        assert!(b.is_consumed());
    }
}
