//! Observation encodings of gridworld states.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::layout::Cell;
use super::mdp::TabularMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingKind {
    /// Length-`n_states` indicator of the agent's cell.
    OneHotPosition,
    /// Three stacked `height x width` binary planes: agent, goal, walls.
    Planes,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObservationError {
    #[error("plane encoding requires a goal")]
    MissingGoal,
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("unknown encoding {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub kind: EncodingKind,
    pub values: Vec<f64>,
}

/// Encodes states of one MDP; caches the wall plane.
#[derive(Debug, Clone)]
pub struct Encoder {
    kind: EncodingKind,
    n_states: usize,
    plane: usize,
    cell_of_state: Vec<usize>,
    walls: Vec<f64>,
}

impl Encoder {
    pub fn new(mdp: &TabularMdp, kind: EncodingKind) -> Self {
        let layout = mdp.layout();
        let plane = layout.width() * layout.height();
        Encoder {
            kind,
            n_states: mdp.n_states(),
            plane,
            cell_of_state: (0..mdp.n_states())
                .map(|s| {
                    let (r, c) = mdp.coords(s);
                    r * layout.width() + c
                })
                .collect(),
            walls: layout
                .cells()
                .iter()
                .map(|c| if *c == Cell::Wall { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn kind(&self) -> EncodingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            EncodingKind::OneHotPosition => self.n_states,
            EncodingKind::Planes => 3 * self.plane,
        }
    }

    /// Writes the encoding into `out`, which must have length [`Self::dim`].
    pub fn encode_into(&self, state: usize, goal: Option<usize>, out: &mut [f64]) -> Result<(), ObservationError> {
        if state >= self.n_states {
            return Err(ObservationError::StateOutOfRange(state));
        }
        debug_assert_eq!(out.len(), self.dim());
        match self.kind {
            EncodingKind::OneHotPosition => {
                out.fill(0.0);
                out[state] = 1.0;
            }
            EncodingKind::Planes => {
                let goal = goal.ok_or(ObservationError::MissingGoal)?;
                if goal >= self.n_states {
                    return Err(ObservationError::StateOutOfRange(goal));
                }
                let (agent, rest) = out.split_at_mut(self.plane);
                let (goal_plane, wall_plane) = rest.split_at_mut(self.plane);
                agent.fill(0.0);
                goal_plane.fill(0.0);
                agent[self.cell_of_state[state]] = 1.0;
                goal_plane[self.cell_of_state[goal]] = 1.0;
                wall_plane.copy_from_slice(&self.walls);
            }
        }
        Ok(())
    }

    pub fn encode(&self, state: usize, goal: Option<usize>) -> Result<Observation, ObservationError> {
        let mut values = vec![0.0; self.dim()];
        self.encode_into(state, goal, &mut values)?;
        Ok(Observation {
            kind: self.kind,
            values,
        })
    }
}

/// One-shot encoding of `state` (and `goal`, for plane encodings).
pub fn encode(
    mdp: &TabularMdp,
    state: usize,
    goal: Option<usize>,
    kind: EncodingKind,
) -> Result<Observation, ObservationError> {
    Encoder::new(mdp, kind).encode(state, goal)
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::OneHotPosition => "one-hot",
            EncodingKind::Planes => "planes",
        })
    }
}

impl FromStr for EncodingKind {
    type Err = ObservationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "one-hot" | "one-hot-position" => Ok(EncodingKind::OneHotPosition),
            "planes" => Ok(EncodingKind::Planes),
            other => Err(ObservationError::UnknownKind(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridLayout, SlipSpec};

    fn mdp() -> TabularMdp {
        TabularMdp::build(&GridLayout::builtin("open10").unwrap(), SlipSpec::deterministic())
    }

    #[test]
    fn one_hot_is_basis_vector() {
        let mdp = mdp();
        let obs = encode(&mdp, 0, None, EncodingKind::OneHotPosition).unwrap();
        assert_eq!(obs.values.len(), 64);
        assert_eq!(obs.values[0], 1.0);
        assert_eq!(obs.values.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn planes_count_set_bits() {
        let mdp = mdp();
        let walls = mdp.layout().wall_count();
        let obs = encode(&mdp, 3, Some(10), EncodingKind::Planes).unwrap();
        assert_eq!(obs.values.len(), 300);
        assert_eq!(obs.values.iter().filter(|v| **v != 0.0).count(), 2 + walls);
        assert!(obs.values.iter().all(|v| *v == 0.0 || *v == 1.0));
        // agent on goal: still one bit in each plane
        let same = encode(&mdp, 10, Some(10), EncodingKind::Planes).unwrap();
        assert_eq!(same.values.iter().filter(|v| **v != 0.0).count(), 2 + walls);
    }

    #[test]
    fn planes_need_goal() {
        assert_eq!(
            encode(&mdp(), 0, None, EncodingKind::Planes),
            Err(ObservationError::MissingGoal)
        );
    }

    #[test]
    fn encodings_are_injective() {
        let mdp = mdp();
        for kind in [EncodingKind::OneHotPosition, EncodingKind::Planes] {
            let enc = Encoder::new(&mdp, kind);
            let all: Vec<_> = (0..mdp.n_states())
                .map(|s| enc.encode(s, Some(0)).unwrap().values)
                .collect();
            for i in 0..all.len() {
                for j in i + 1..all.len() {
                    assert_ne!(all[i], all[j]);
                }
            }
        }
    }
}
