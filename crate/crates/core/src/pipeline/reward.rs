use std::sync::Arc;

use super::PipelineError;
use crate::empowerment::EmpowermentMap;
use crate::grid::{goal_reward, RewardSource, TabularMdp};

#[derive(Debug, Clone, PartialEq)]
pub enum ShimKind {
    /// `E(s) / max E`, with exactly 1 at the argmax.
    EmpowermentNormalized {
        values: Arc<[f64]>,
        max_value: f64,
    },
    GoalIndicator {
        goal: usize,
    },
}

/// Per-state reward handed to the episode runner.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardShim {
    pub kind: ShimKind,
}

impl RewardShim {
    /// Normalized intrinsic reward; fails if `map` belongs to another MDP.
    pub fn empowerment(map: &EmpowermentMap, mdp: &TabularMdp) -> Result<Self, PipelineError> {
        if !map.matches(mdp) {
            return Err(PipelineError::FingerprintMismatch);
        }
        Ok(RewardShim {
            kind: ShimKind::EmpowermentNormalized {
                values: map.normalized().into(),
                max_value: map.max(),
            },
        })
    }

    pub fn goal(goal: usize, mdp: &TabularMdp) -> Result<Self, PipelineError> {
        if goal >= mdp.n_states() {
            return Err(PipelineError::Config(format!("goal {goal} out of range")));
        }
        Ok(RewardShim {
            kind: ShimKind::GoalIndicator { goal },
        })
    }

    pub fn reward(&self, state: usize) -> f64 {
        match &self.kind {
            ShimKind::EmpowermentNormalized { values, .. } => values[state],
            ShimKind::GoalIndicator { goal } => goal_reward(state, *goal),
        }
    }

    pub fn source(&self) -> RewardSource {
        match &self.kind {
            ShimKind::EmpowermentNormalized { values, .. } => RewardSource::StateTable(values.clone()),
            ShimKind::GoalIndicator { .. } => RewardSource::GoalIndicator,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empowerment::{empowerment_map, HorizonSpec};
    use crate::grid::{GridLayout, SlipSpec};

    #[test]
    fn normalized_rewards_peak_at_one() {
        let mdp = TabularMdp::build(&GridLayout::open(5, 5), SlipSpec::deterministic());
        let map = empowerment_map(&mdp, &HorizonSpec::NStep(2), &Default::default()).unwrap();
        let shim = RewardShim::empowerment(&map, &mdp).unwrap();
        assert_eq!(shim.reward(map.argmax()), 1.0);
        assert!((0..mdp.n_states()).all(|s| (0.0..=1.0).contains(&shim.reward(s))));

        let other = TabularMdp::build(&GridLayout::open(5, 5), SlipSpec::new(0.1).unwrap());
        assert!(matches!(
            RewardShim::empowerment(&map, &other),
            Err(PipelineError::FingerprintMismatch)
        ));
        let g = RewardShim::goal(3, &mdp).unwrap();
        assert_eq!((g.reward(3), g.reward(4)), (1.0, 0.0));
        assert!(RewardShim::goal(99, &mdp).is_err());
    }
}
