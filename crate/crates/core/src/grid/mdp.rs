//! Tabular transition model built from a [`GridLayout`].

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::layout::GridLayout;

/// Number of actions in every gridworld MDP.
pub const N_ACTIONS: usize = 5;

/// Absolute grid actions. Moving into a wall or off the map leaves the agent in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Wait,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::Up, Action::Down, Action::Left, Action::Right, Action::Wait];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (i64, i64) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Wait => (0, 0),
        }
    }

    /// The two perpendicular deviations (left of heading, right of heading).
    /// `None` for [`Action::Wait`], which never slips.
    pub fn perpendicular(self) -> Option<(Action, Action)> {
        match self {
            Action::Up => Some((Action::Left, Action::Right)),
            Action::Down => Some((Action::Right, Action::Left)),
            Action::Left => Some((Action::Down, Action::Up)),
            Action::Right => Some((Action::Up, Action::Down)),
            Action::Wait => None,
        }
    }
}

/// Probability that a movement action is diverted sideways, split evenly
/// between the two perpendicular directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipSpec {
    slip_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("slip probability must lie in [0, 1), got {0}")]
pub struct InvalidSlip(pub f64);

impl SlipSpec {
    pub fn new(slip_probability: f64) -> Result<Self, InvalidSlip> {
        if (0.0..1.0).contains(&slip_probability) {
            Ok(SlipSpec { slip_probability })
        } else {
            Err(InvalidSlip(slip_probability))
        }
    }

    pub fn deterministic() -> Self {
        SlipSpec { slip_probability: 0.0 }
    }

    pub fn probability(&self) -> f64 {
        self.slip_probability
    }
}

impl Default for SlipSpec {
    fn default() -> Self {
        Self::deterministic()
    }
}

/// Dense tabular MDP over the free cells of a layout.
///
/// States are the free cells in row-major order. The transition tensor is
/// stored densely as `[state][action][next_state]`, with a sparse successor
/// list kept alongside for sampling and channel composition.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    layout: GridLayout,
    slip: SlipSpec,
    n_states: usize,
    transition: Vec<f64>,
    successors: Vec<Vec<(usize, f64)>>,
    initial: Vec<f64>,
    coords: Vec<(usize, usize)>,
    state_at: Vec<Option<usize>>,
    deterministic: bool,
}

impl TabularMdp {
    pub fn build(layout: &GridLayout, slip: SlipSpec) -> Self {
        let (w, h) = (layout.width(), layout.height());
        let mut coords = Vec::new();
        let mut state_at = vec![None; w * h];
        for r in 0..h {
            for c in 0..w {
                if layout.is_free(r, c) {
                    state_at[r * w + c] = Some(coords.len());
                    coords.push((r, c));
                }
            }
        }
        let n_states = coords.len();
        let p = slip.probability();

        let target = |s: usize, action: Action| -> usize {
            let (r, c) = coords[s];
            let (dr, dc) = action.delta();
            layout.offset(r, c, dr, dc).and_then(|cell| state_at[cell]).unwrap_or(s)
        };

        let mut transition = vec![0.0; n_states * N_ACTIONS * n_states];
        let mut successors = Vec::with_capacity(n_states * N_ACTIONS);
        for s in 0..n_states {
            for action in Action::ALL {
                let base = (s * N_ACTIONS + action.index()) * n_states;
                let row = &mut transition[base..base + n_states];
                match action.perpendicular() {
                    Some((left, right)) if p > 0.0 => {
                        row[target(s, action)] += 1.0 - p;
                        row[target(s, left)] += p / 2.0;
                        row[target(s, right)] += p / 2.0;
                    }
                    _ => row[target(s, action)] = 1.0,
                }
                successors.push(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &q)| q > 0.0)
                        .map(|(i, &q)| (i, q))
                        .collect(),
                );
            }
        }
        let deterministic = successors.iter().all(|row: &Vec<(usize, f64)>| row.len() == 1);

        TabularMdp {
            layout: layout.clone(),
            slip,
            n_states,
            transition,
            successors,
            initial: vec![1.0 / n_states as f64; n_states],
            coords,
            state_at,
            deterministic,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        N_ACTIONS
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn slip(&self) -> SlipSpec {
        self.slip
    }

    /// `P(. | state, action)` as a dense probability vector.
    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let base = (state * N_ACTIONS + action) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    /// Nonzero entries of `P(. | state, action)` in ascending state order.
    pub fn successors(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.successors[state * N_ACTIONS + action]
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// Initial state distribution (uniform over free cells).
    pub fn initial_distribution(&self) -> &[f64] {
        &self.initial
    }

    pub fn coords(&self, state: usize) -> (usize, usize) {
        self.coords[state]
    }

    pub fn state_at(&self, row: usize, col: usize) -> Option<usize> {
        if row >= self.layout.height() || col >= self.layout.width() {
            return None;
        }
        self.state_at[row * self.layout.width() + col]
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    /// Deterministic successor. Panics on stochastic MDPs.
    pub fn next_state(&self, state: usize, action: usize) -> usize {
        let succ = self.successors(state, action);
        assert_eq!(succ.len(), 1, "next_state called on a stochastic transition");
        succ[0].0
    }

    /// Hex digest of the transition tensor, used to tie derived artifacts to this MDP.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_states as u64).to_le_bytes());
        hasher.update((self.layout.width() as u64).to_le_bytes());
        for &(r, c) in &self.coords {
            hasher.update((r as u64).to_le_bytes());
            hasher.update((c as u64).to_le_bytes());
        }
        for &p in &self.transition {
            hasher.update(p.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Shortest-path distances (in moves) between all pairs of states.
    pub fn distances(&self) -> Vec<Vec<usize>> {
        (0..self.n_states)
            .map(|s| {
                let mut dist = vec![usize::MAX; self.n_states];
                dist[s] = 0;
                let mut queue = std::collections::VecDeque::from([s]);
                while let Some(u) = queue.pop_front() {
                    for a in 0..N_ACTIONS {
                        for &(v, _) in self.successors(u, a) {
                            if dist[v] == usize::MAX {
                                dist[v] = dist[u] + 1;
                                queue.push_back(v);
                            }
                        }
                    }
                }
                dist
            })
            .collect()
    }
}
