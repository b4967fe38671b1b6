use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use super::config::{ExperimentConfig, PretrainKind, Variant};
use super::metrics::{MetricsRecord, Phase};
use super::reward::RewardShim;
use super::sweep::RunSpec;
use super::PipelineError;
use crate::agents::{behavior_clone, make_agent, Agent};
use crate::empowerment::{
    capacity_achieving_policies, empowerment_map, EmpowermentMap, EmpowermentOptions, HorizonSpec,
};
use crate::grid::{
    Encoder, EncodingKind, EpisodeRunner, GoalMode, GridLayout, RewardSource, RunnerConfig, SlipSpec, TabularMdp,
    EPISODE_LENGTH, N_ACTIONS,
};
use crate::nn::Checkpoint;
use crate::rng::{self, derive_seed, label, SimRng};

/// `builtin:<name>` or a path to a layout file.
pub fn resolve_layout(spec: &str) -> Result<GridLayout, PipelineError> {
    let fail = |reason: String| PipelineError::Layout {
        path: spec.to_string(),
        reason,
    };
    if let Some(name) = spec.strip_prefix("builtin:") {
        return GridLayout::builtin(name).ok_or_else(|| fail("no such builtin layout".into()));
    }
    let text = std::fs::read_to_string(spec).map_err(|e| fail(e.to_string()))?;
    let name = std::path::Path::new(spec)
        .file_stem()
        .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned());
    GridLayout::parse(name, &text).map_err(|e| fail(e.to_string()))
}

/// A validated config bound to its MDP, with empowerment maps cached per horizon.
#[derive(Debug)]
pub struct Experiment {
    config: ExperimentConfig,
    mdp: Arc<TabularMdp>,
    maps: Mutex<HashMap<String, Arc<EmpowermentMap>>>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let layout = resolve_layout(&config.layout)?;
        let slip = SlipSpec::new(config.slip).map_err(|e| PipelineError::Config(format!("slip {}", e.0)))?;
        let mdp = Arc::new(TabularMdp::build(&layout, slip));
        Ok(Experiment {
            config,
            mdp,
            maps: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn mdp(&self) -> &Arc<TabularMdp> {
        &self.mdp
    }

    pub fn obs_dim(&self) -> usize {
        Encoder::new(&self.mdp, self.config.agent.encoding).dim()
    }

    pub fn empowerment_map(&self, spec: &HorizonSpec) -> Result<Arc<EmpowermentMap>, PipelineError> {
        let key = spec.to_string();
        if let Some(m) = self.maps.lock().expect("map cache lock").get(&key) {
            return Ok(m.clone());
        }
        let map = Arc::new(empowerment_map(&self.mdp, spec, &EmpowermentOptions::default())?);
        self.maps.lock().expect("map cache lock").insert(key, map.clone());
        Ok(map)
    }

    /// Fine-tuning evaluation points: 0, every interval, and the final step.
    pub fn eval_points(&self) -> Vec<u64> {
        let c = &self.config;
        let mut points: Vec<u64> = (0..=c.finetune_steps / c.eval_interval)
            .map(|k| k * c.eval_interval)
            .collect();
        if points.last() != Some(&c.finetune_steps) {
            points.push(c.finetune_steps);
        }
        points
    }

    fn runner_config(&self, goal: GoalMode, display_goal: Option<usize>, reward: RewardSource) -> RunnerConfig {
        RunnerConfig {
            n_envs: self.config.agent.n_envs,
            episode_length: EPISODE_LENGTH,
            encoding: self.config.agent.encoding,
            goal,
            display_goal,
            reward,
        }
    }

    fn fresh_agent(&self, seed: u64) -> Result<Box<dyn Agent>, PipelineError> {
        Ok(make_agent(&self.config.agent, self.obs_dim(), N_ACTIONS, seed)?)
    }
}

/// Task seen by evaluation episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSetup {
    pub encoding: EncodingKind,
    pub goal: GoalMode,
    pub display_goal: Option<usize>,
    pub reward: RewardSource,
}

impl EvalSetup {
    pub fn goal_reaching(encoding: EncodingKind, goal: usize) -> Self {
        EvalSetup {
            encoding,
            goal: GoalMode::Fixed(goal),
            display_goal: None,
            reward: RewardSource::GoalIndicator,
        }
    }
}

/// Mean and population standard deviation of undiscounted episode returns.
/// `act` sees the true state, its observation and the policy stream.
pub fn evaluate_policy(
    mdp: &Arc<TabularMdp>,
    setup: &EvalSetup,
    episodes: usize,
    seed: u64,
    mut act: impl FnMut(usize, &[f64], &mut SimRng) -> usize,
) -> Result<(f64, f64), PipelineError> {
    if episodes == 0 {
        return Err(PipelineError::NoEpisodes);
    }
    let config = RunnerConfig {
        n_envs: 1,
        episode_length: EPISODE_LENGTH,
        encoding: setup.encoding,
        goal: setup.goal,
        display_goal: setup.display_goal,
        reward: setup.reward.clone(),
    };
    let mut runner = EpisodeRunner::new(mdp.clone(), config, derive_seed(seed, &[label("eval-env")]))?;
    let mut policy_rng = rng::stream(seed, &[label("eval-policy")]);
    let mut returns = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut total = 0.0;
        for _ in 0..EPISODE_LENGTH {
            let state = runner.states()[0];
            let obs = &runner.observations()[0];
            let a = act(state, obs, &mut policy_rng);
            total += runner.step(&[a])?.rewards[0];
        }
        returns.push(total);
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Goal-reaching return of a checkpoint under the experiment's agent config.
/// Parameters stay frozen; the agent only acts.
pub fn evaluate(
    exp: &Experiment,
    ck: &Checkpoint,
    goal: usize,
    episodes: usize,
    seed: u64,
) -> Result<(f64, f64), PipelineError> {
    if goal >= exp.mdp.n_states() {
        return Err(PipelineError::Config(format!("goal {goal} out of range")));
    }
    let mut agent = exp.fresh_agent(seed)?;
    agent.load(ck)?;
    let setup = EvalSetup::goal_reaching(exp.config.agent.encoding, goal);
    evaluate_policy(&exp.mdp, &setup, episodes, seed, |_, obs, r| agent.act(obs, r))
}

/// Optimal expected `horizon`-step return to `goal` from every state, by backward induction.
pub fn oracle_values(mdp: &TabularMdp, goal: usize, horizon: usize) -> Vec<f64> {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    for _ in 0..horizon {
        v = (0..n)
            .map(|s| {
                (0..N_ACTIONS)
                    .map(|a| {
                        mdp.successors(s, a)
                            .iter()
                            .map(|&(s2, p)| p * (if s2 == goal { 1.0 } else { 0.0 } + v[s2]))
                            .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    v
}

/// Optimal expected episode return to `goal` from the initial distribution.
pub fn oracle_return(mdp: &TabularMdp, goal: usize) -> f64 {
    let v = oracle_values(mdp, goal, EPISODE_LENGTH);
    mdp.initial_distribution().iter().zip(&v).map(|(p, x)| p * x).sum()
}

/// Output of one pre-training run.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub checkpoint: Checkpoint,
    /// Intrinsic-return evaluation after capacity-maximizing pre-training.
    pub record: Option<MetricsRecord>,
}

/// Initial weights for `variant`. `map` overrides the cached map for the
/// variant's horizon; it must belong to the experiment's MDP.
pub fn pretrain(
    exp: &Experiment,
    variant: &Variant,
    seed: u64,
    map: Option<&EmpowermentMap>,
) -> Result<Pretrained, PipelineError> {
    let cfg = &exp.config;
    let mut agent = exp.fresh_agent(derive_seed(seed, &[label("pretrain")]))?;
    let record = match variant.pretrain {
        PretrainKind::None => None,
        PretrainKind::CapacityAchieving => {
            let targets = capacity_achieving_policies(&exp.mdp, &EmpowermentOptions::default())?;
            let (obs, targets) = bc_dataset(&exp.mdp, cfg.agent.encoding, &targets);
            let policy = agent.policy_mut().ok_or(crate::agents::AgentError::Unsupported(
                "behavior cloning",
                cfg.agent.algorithm,
            ))?;
            let mut r = rng::stream(seed, &[label("bc")]);
            behavior_clone(policy, &obs, &targets, &cfg.bc, &mut r)?;
            None
        }
        PretrainKind::CapacityMaximizing => {
            let horizon = variant
                .horizon
                .ok_or_else(|| PipelineError::Config("capacity-maximizing needs a horizon".into()))?;
            let cached;
            let map = match map {
                Some(m) => m,
                None => {
                    cached = exp.empowerment_map(&horizon)?;
                    &cached
                }
            };
            let shim = RewardShim::empowerment(map, &exp.mdp)?;
            let display = Some(map.argmax());
            let rc = exp.runner_config(GoalMode::None, display, shim.source());
            let mut runner = EpisodeRunner::new(exp.mdp.clone(), rc, derive_seed(seed, &[label("pretrain-env")]))?;
            let start = Instant::now();
            agent.train_until(&mut runner, cfg.pretrain_steps)?;
            let steps = runner.step_counter();
            let setup = EvalSetup {
                encoding: cfg.agent.encoding,
                goal: GoalMode::None,
                display_goal: display,
                reward: shim.source(),
            };
            let eval_seed = derive_seed(seed, &[label("eval"), steps]);
            let (mean, std) = evaluate_policy(&exp.mdp, &setup, cfg.agent.eval_episodes, eval_seed, |_, o, r| {
                agent.act(o, r)
            })?;
            Some(MetricsRecord {
                run_id: format!("{variant}-pretrain-s{seed}"),
                seed,
                phase: Phase::Pretrain,
                algorithm: cfg.agent.algorithm.to_string(),
                pretrain_kind: variant.pretrain.to_string(),
                horizon_spec: variant.horizon_label(),
                goal: None,
                env_steps: steps,
                mean_return: mean,
                std_return: std,
                wallclock_s: if cfg.record_wallclock {
                    start.elapsed().as_secs_f64()
                } else {
                    0.0
                },
            })
        }
    };
    Ok(Pretrained {
        checkpoint: agent.checkpoint(),
        record,
    })
}

/// Every state once for position encodings; every (state, goal) pair for
/// plane encodings, so the cloned behavior ignores the goal plane.
fn bc_dataset(mdp: &TabularMdp, encoding: EncodingKind, targets: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let enc = Encoder::new(mdp, encoding);
    let n = mdp.n_states();
    let goals: Vec<Option<usize>> = match encoding {
        EncodingKind::OneHotPosition => vec![None],
        EncodingKind::Planes => (0..n).map(Some).collect(),
    };
    let mut obs = Vec::with_capacity(n * goals.len());
    let mut out = Vec::with_capacity(n * goals.len());
    for s in 0..n {
        for &g in &goals {
            obs.push(enc.encode(s, g).expect("valid state and goal").values);
            out.push(targets[s].clone());
        }
    }
    (obs, out)
}

/// Trains a copy of `ck` on the goal-indicator task of `run.goal` and
/// evaluates it at every point of [`Experiment::eval_points`].
pub fn finetune(exp: &Experiment, run: &RunSpec, ck: &Checkpoint) -> Result<Vec<MetricsRecord>, PipelineError> {
    let cfg = &exp.config;
    let goal = run.goal;
    if goal >= exp.mdp.n_states() {
        return Err(PipelineError::Config(format!("goal {goal} out of range")));
    }
    let mut agent = exp.fresh_agent(derive_seed(run.seed, &[label("finetune"), goal as u64]))?;
    agent.load(ck)?;
    let rc = exp.runner_config(GoalMode::Fixed(goal), None, RewardSource::GoalIndicator);
    let mut runner = EpisodeRunner::new(
        exp.mdp.clone(),
        rc,
        derive_seed(run.seed, &[label("finetune-env"), goal as u64]),
    )?;
    let setup = EvalSetup::goal_reaching(cfg.agent.encoding, goal);
    let start = Instant::now();
    let mut records = Vec::new();
    for point in exp.eval_points() {
        if point > 0 {
            agent.train_until(&mut runner, point)?;
        }
        let steps = runner.step_counter();
        let eval_seed = derive_seed(run.seed, &[label("eval"), steps]);
        let (mean, std) = evaluate_policy(&exp.mdp, &setup, cfg.agent.eval_episodes, eval_seed, |_, o, r| {
            agent.act(o, r)
        })?;
        records.push(MetricsRecord {
            run_id: run.run_id.clone(),
            seed: run.seed,
            phase: Phase::Finetune,
            algorithm: cfg.agent.algorithm.to_string(),
            pretrain_kind: run.variant.pretrain.to_string(),
            horizon_spec: run.variant.horizon_label(),
            goal: Some(goal),
            env_steps: steps,
            mean_return: mean,
            std_return: std,
            wallclock_s: if cfg.record_wallclock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }
    Ok(records)
}
