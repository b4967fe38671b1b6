use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;

use super::PipelineError;
use crate::agents::{AgentConfig, Algorithm, BcConfig};
use crate::empowerment::HorizonSpec;
use crate::rng;

/// How an agent is initialized before fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PretrainKind {
    /// Fresh random weights.
    None,
    /// RL on the normalized empowerment reward.
    CapacityMaximizing,
    /// Behavior cloning of the per-state capacity-achieving action distribution.
    CapacityAchieving,
}

impl PretrainKind {
    pub fn name(self) -> &'static str {
        match self {
            PretrainKind::None => "none",
            PretrainKind::CapacityMaximizing => "capacity-maximizing",
            PretrainKind::CapacityAchieving => "capacity-achieving",
        }
    }
}

impl fmt::Display for PretrainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PretrainKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            PretrainKind::None,
            PretrainKind::CapacityMaximizing,
            PretrainKind::CapacityAchieving,
        ]
        .into_iter()
        .find(|k| k.name() == s)
        .ok_or_else(|| PipelineError::Config(format!("unknown pretrain kind {s:?}")))
    }
}

/// One arm of a comparison: a pre-training kind and, for the
/// capacity-maximizing kind, the empowerment horizon that defines its reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub pretrain: PretrainKind,
    pub horizon: Option<HorizonSpec>,
}

impl Variant {
    pub fn scratch() -> Self {
        Variant {
            pretrain: PretrainKind::None,
            horizon: None,
        }
    }

    pub fn maximizing(horizon: HorizonSpec) -> Self {
        Variant {
            pretrain: PretrainKind::CapacityMaximizing,
            horizon: Some(horizon),
        }
    }

    pub fn achieving() -> Self {
        Variant {
            pretrain: PretrainKind::CapacityAchieving,
            horizon: None,
        }
    }

    /// Horizon column of the metrics CSV.
    pub fn horizon_label(&self) -> String {
        self.horizon.map_or_else(|| "none".to_string(), |h| h.to_string())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.horizon {
            Some(h) => write!(f, "{}@{}", self.pretrain, h),
            None => write!(f, "{}", self.pretrain),
        }
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    /// `none`, `capacity-achieving` or `capacity-maximizing@<horizon>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (kind, horizon) = match s.split_once('@') {
            Some((k, h)) => (k, Some(h.parse::<HorizonSpec>()?)),
            None => (s, None),
        };
        let pretrain: PretrainKind = kind.parse()?;
        match (pretrain, horizon) {
            (PretrainKind::CapacityMaximizing, None) => Err(PipelineError::Config(format!(
                "variant {s:?} needs a horizon, e.g. capacity-maximizing@discounted"
            ))),
            (PretrainKind::CapacityMaximizing, h) => Ok(Variant { pretrain, horizon: h }),
            (_, Some(_)) => Err(PipelineError::Config(format!("variant {s:?} takes no horizon"))),
            (_, None) => Ok(Variant {
                pretrain,
                horizon: None,
            }),
        }
    }
}

/// Which goal states a sweep fine-tunes on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GoalSweep {
    All,
    /// `n` distinct goals drawn without replacement from the goal seed.
    Sampled(usize),
    List(Vec<usize>),
}

impl GoalSweep {
    /// Sorted goal states for an MDP with `n_states` states.
    pub fn goals(&self, n_states: usize, goal_seed: u64) -> Result<Vec<usize>, PipelineError> {
        let mut goals = match self {
            GoalSweep::All => (0..n_states).collect(),
            GoalSweep::Sampled(n) => {
                if *n == 0 || *n > n_states {
                    return Err(PipelineError::Config(format!(
                        "cannot sample {n} goals from {n_states} states"
                    )));
                }
                let mut r = rng::stream(goal_seed, &[rng::label("goals")]);
                sample(&mut r, n_states, *n).into_vec()
            }
            GoalSweep::List(list) => {
                if list.is_empty() {
                    return Err(PipelineError::Config("empty goal list".into()));
                }
                if let Some(g) = list.iter().find(|&&g| g >= n_states) {
                    return Err(PipelineError::Config(format!("goal {g} is not a free cell index")));
                }
                list.clone()
            }
        };
        goals.sort_unstable();
        goals.dedup();
        Ok(goals)
    }
}

impl fmt::Display for GoalSweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalSweep::All => f.write_str("all"),
            GoalSweep::Sampled(n) => write!(f, "sampled:{n}"),
            GoalSweep::List(l) => {
                let items: Vec<String> = l.iter().map(|g| g.to_string()).collect();
                write!(f, "list:{}", items.join(","))
            }
        }
    }
}

impl FromStr for GoalSweep {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PipelineError::Config(format!("cannot parse goal sweep {s:?}"));
        match s.trim() {
            "all" => Ok(GoalSweep::All),
            other => match other.split_once(':') {
                Some(("sampled", n)) => Ok(GoalSweep::Sampled(n.parse().map_err(|_| bad())?)),
                Some(("list", l)) => l
                    .split(',')
                    .map(|g| g.trim().parse().map_err(|_| bad()))
                    .collect::<Result<Vec<_>, _>>()
                    .map(GoalSweep::List),
                _ => Err(bad()),
            },
        }
    }
}

/// Declarative description of a pre-training / fine-tuning experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Layout file path, or `builtin:<name>`.
    pub layout: String,
    pub slip: f64,
    pub agent: AgentConfig,
    /// Variants compared by a sweep; `pretrain` and `finetune` use the first.
    pub variants: Vec<Variant>,
    pub pretrain_steps: u64,
    pub finetune_steps: u64,
    pub eval_interval: u64,
    pub seeds: Vec<u64>,
    pub goal_sweep: GoalSweep,
    pub goal_seed: u64,
    pub bc: BcConfig,
    /// Fraction of the oracle return that counts as solving a goal.
    pub threshold_fraction: f64,
    /// Write measured wall-clock seconds; off by default so CSVs are reproducible.
    pub record_wallclock: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults around an algorithm's published hyperparameters.
    pub fn new(algorithm: Algorithm) -> Self {
        ExperimentConfig {
            layout: "builtin:open10".into(),
            slip: 0.0,
            agent: AgentConfig::defaults(algorithm),
            variants: vec![Variant::maximizing(HorizonSpec::discounted_default())],
            pretrain_steps: 200_000,
            finetune_steps: 200_000,
            eval_interval: 25_000,
            seeds: vec![0],
            goal_sweep: GoalSweep::All,
            goal_seed: 0,
            bc: BcConfig::default(),
            threshold_fraction: 0.8,
            record_wallclock: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_string()));
        self.agent.validate()?;
        if !(0.0..1.0).contains(&self.slip) {
            return fail("slip must lie in [0, 1)");
        }
        if self.seeds.is_empty() {
            return fail("seeds must not be empty");
        }
        if self.variants.is_empty() {
            return fail("at least one variant is required");
        }
        if self.eval_interval == 0 || self.eval_interval > self.finetune_steps {
            return fail("eval_interval must be in [1, finetune_steps]");
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction <= 1.0) {
            return fail("threshold_fraction must lie in (0, 1]");
        }
        if self.bc.steps == 0 || self.bc.batch_size == 0 || !(self.bc.lr > 0.0) {
            return fail("bc steps, batch size and learning rate must be positive");
        }
        for v in &self.variants {
            if let Some(h) = v.horizon {
                h.validate()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_round_trip() {
        for s in [
            "none",
            "capacity-achieving",
            "capacity-maximizing@discounted:0.95:32:5",
            "capacity-maximizing@n:5",
        ] {
            let v: Variant = s.parse().unwrap();
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("capacity-maximizing".parse::<Variant>().is_err());
        assert!("none@n:3".parse::<Variant>().is_err());
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn goal_sweeps() {
        assert_eq!(GoalSweep::All.goals(4, 0).unwrap(), vec![0, 1, 2, 3]);
        let g = GoalSweep::Sampled(16).goals(64, 7).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g, GoalSweep::Sampled(16).goals(64, 7).unwrap());
        assert!(GoalSweep::Sampled(65).goals(64, 7).is_err());
        assert_eq!(
            "list:3,1".parse::<GoalSweep>().unwrap().goals(5, 0).unwrap(),
            vec![1, 3]
        );
        assert!(GoalSweep::List(vec![9]).goals(5, 0).is_err());
        for s in ["all", "sampled:8", "list:1,2"] {
            assert_eq!(s.parse::<GoalSweep>().unwrap().to_string(), s);
        }
    }

    #[test]
    fn validation() {
        let mut c = ExperimentConfig::new(Algorithm::Reinforce);
        c.validate().unwrap();
        c.eval_interval = c.finetune_steps + 1;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::new(Algorithm::Reinforce);
        c.seeds.clear();
        assert!(c.validate().is_err());
    }
}
