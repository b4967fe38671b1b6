//! `key = value` experiment documents.

use std::collections::HashSet;

use anyhow::{anyhow, bail, Context, Result};
use empower_core::agents::{AgentConfig, Algorithm};
use empower_core::empowerment::HorizonSpec;
use empower_core::pipeline::{ExperimentConfig, GoalSweep, PretrainKind, Variant};

/// Every accepted key, in echo order.
pub const KEYS: &[&str] = &[
    "algorithm",
    "layout",
    "slip",
    "pretrain_kind",
    "horizon",
    "variants",
    "pretrain_steps",
    "finetune_steps",
    "eval_interval",
    "eval_episodes",
    "seeds",
    "goals",
    "goal_seed",
    "threshold_fraction",
    "record_wallclock",
    "gamma",
    "hidden",
    "n_envs",
    "actor_lr",
    "critic_lr",
    "entropy_coef",
    "batch_size",
    "encoding",
    "bc.steps",
    "bc.batch_size",
    "bc.lr",
    "ppo.clip_range",
    "ppo.gae_lambda",
    "ppo.epochs",
    "ppo.rollout_length",
    "ppo.minibatch_size",
    "ppo.value_coef",
    "ppo.max_grad_norm",
    "ppo.normalize_advantages",
    "ppo.reinit_critic",
    "dqn.replay_capacity",
    "dqn.eps_start",
    "dqn.eps_end",
    "dqn.eps_decay_steps",
    "dqn.target_tau",
    "dqn.target_interval",
    "dqn.seed_steps",
    "dqn.train_every",
    "dqn.gradient_steps",
];

/// Parsed document: ordered, duplicate-free entries with known keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    entries: Vec<(String, String)>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ConfigDocument::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            doc.set(k.trim(), v.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(doc)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown key {key:?}");
        }
        if self.get(key).is_some() {
            bail!("duplicate key {key:?}");
        }
        self.entries.push((key.to_string(), value.to_string()));
        Ok(())
    }

    /// Replaces or adds `key`.
    pub fn set_override(&mut self, key: &str, value: &str) -> Result<()> {
        self.entries.retain(|(k, _)| k != key);
        self.set(key, value)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Builds and validates the experiment. `default_seed` applies when
    /// the document has no `seeds`.
    pub fn to_experiment(&self, default_seed: u64) -> Result<ExperimentConfig> {
        let algorithm: Algorithm = match self.get("algorithm") {
            Some(a) => a.parse()?,
            None => Algorithm::Reinforce,
        };
        let mut c = ExperimentConfig::new(algorithm);
        c.seeds = vec![default_seed];
        let horizon: HorizonSpec = match self.get("horizon") {
            Some(h) => h.parse()?,
            None => HorizonSpec::discounted_default(),
        };
        let with_horizon = |s: &str| -> Result<Variant> {
            let s = s.trim();
            if s == PretrainKind::CapacityMaximizing.name() {
                Ok(Variant::maximizing(horizon))
            } else {
                Ok(s.parse()?)
            }
        };
        c.variants = match (self.get("variants"), self.get("pretrain_kind")) {
            (Some(_), Some(_)) => bail!("set either `variants` or `pretrain_kind`, not both"),
            (Some(list), None) => list.split(',').map(with_horizon).collect::<Result<_>>()?,
            (None, Some(kind)) => vec![with_horizon(kind)?],
            (None, None) => vec![Variant::maximizing(horizon)],
        };
        for (key, value) in &self.entries {
            apply(&mut c, key, value).with_context(|| format!("key {key:?} = {value:?}"))?;
        }
        c.validate()?;
        Ok(c)
    }
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow!("not a valid number"))
}

fn boolean(v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => bail!("expected true or false"),
    }
}

fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>> {
    if v.is_empty() || v == "none" {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn apply(c: &mut ExperimentConfig, key: &str, v: &str) -> Result<()> {
    let a: &mut AgentConfig = &mut c.agent;
    match key {
        // consumed before the per-key pass
        "algorithm" | "horizon" | "variants" | "pretrain_kind" => {}
        "layout" => c.layout = v.to_string(),
        "slip" => c.slip = num(v)?,
        "pretrain_steps" => c.pretrain_steps = num(v)?,
        "finetune_steps" => c.finetune_steps = num(v)?,
        "eval_interval" => c.eval_interval = num(v)?,
        "eval_episodes" => a.eval_episodes = num(v)?,
        "seeds" => c.seeds = list(v)?,
        "goals" => c.goal_sweep = v.parse::<GoalSweep>()?,
        "goal_seed" => c.goal_seed = num(v)?,
        "threshold_fraction" => c.threshold_fraction = num(v)?,
        "record_wallclock" => c.record_wallclock = boolean(v)?,
        "gamma" => a.gamma = num(v)?,
        "hidden" => a.hidden = list(v)?,
        "n_envs" => a.n_envs = num(v)?,
        "actor_lr" => a.actor_lr = num(v)?,
        "critic_lr" => a.critic_lr = num(v)?,
        "entropy_coef" => a.entropy_coef = num(v)?,
        "batch_size" => a.batch_size = num(v)?,
        "encoding" => a.encoding = v.parse()?,
        "bc.steps" => c.bc.steps = num(v)?,
        "bc.batch_size" => c.bc.batch_size = num(v)?,
        "bc.lr" => c.bc.lr = num(v)?,
        "ppo.clip_range" => a.ppo.clip_range = num(v)?,
        "ppo.gae_lambda" => a.ppo.gae_lambda = num(v)?,
        "ppo.epochs" => a.ppo.epochs = num(v)?,
        "ppo.rollout_length" => a.ppo.rollout_length = num(v)?,
        "ppo.minibatch_size" => a.ppo.minibatch_size = num(v)?,
        "ppo.value_coef" => a.ppo.value_coef = num(v)?,
        "ppo.max_grad_norm" => a.ppo.max_grad_norm = num(v)?,
        "ppo.normalize_advantages" => a.ppo.normalize_advantages = boolean(v)?,
        "ppo.reinit_critic" => a.ppo.reinit_critic = boolean(v)?,
        "dqn.replay_capacity" => a.dqn.replay_capacity = num(v)?,
        "dqn.eps_start" => a.dqn.eps_start = num(v)?,
        "dqn.eps_end" => a.dqn.eps_end = num(v)?,
        "dqn.eps_decay_steps" => a.dqn.eps_decay_steps = num(v)?,
        "dqn.target_tau" => a.dqn.target_tau = num(v)?,
        "dqn.target_interval" => a.dqn.target_interval = num(v)?,
        "dqn.seed_steps" => a.dqn.seed_steps = num(v)?,
        "dqn.train_every" => a.dqn.train_every = num(v)?,
        "dqn.gradient_steps" => a.dqn.gradient_steps = num(v)?,
        other => bail!("unknown key {other:?}"),
    }
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    if items.is_empty() {
        return "none".into();
    }
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Fully resolved document; parsing it reproduces `c`.
pub fn render(c: &ExperimentConfig) -> String {
    let a = &c.agent;
    let values: Vec<(&str, String)> = vec![
        ("algorithm", a.algorithm.to_string()),
        ("layout", c.layout.clone()),
        ("slip", c.slip.to_string()),
        ("variants", join(&c.variants)),
        ("pretrain_steps", c.pretrain_steps.to_string()),
        ("finetune_steps", c.finetune_steps.to_string()),
        ("eval_interval", c.eval_interval.to_string()),
        ("eval_episodes", a.eval_episodes.to_string()),
        ("seeds", join(&c.seeds)),
        ("goals", c.goal_sweep.to_string()),
        ("goal_seed", c.goal_seed.to_string()),
        ("threshold_fraction", c.threshold_fraction.to_string()),
        ("record_wallclock", c.record_wallclock.to_string()),
        ("gamma", a.gamma.to_string()),
        ("hidden", join(&a.hidden)),
        ("n_envs", a.n_envs.to_string()),
        ("actor_lr", a.actor_lr.to_string()),
        ("critic_lr", a.critic_lr.to_string()),
        ("entropy_coef", a.entropy_coef.to_string()),
        ("batch_size", a.batch_size.to_string()),
        ("encoding", a.encoding.to_string()),
        ("bc.steps", c.bc.steps.to_string()),
        ("bc.batch_size", c.bc.batch_size.to_string()),
        ("bc.lr", c.bc.lr.to_string()),
        ("ppo.clip_range", a.ppo.clip_range.to_string()),
        ("ppo.gae_lambda", a.ppo.gae_lambda.to_string()),
        ("ppo.epochs", a.ppo.epochs.to_string()),
        ("ppo.rollout_length", a.ppo.rollout_length.to_string()),
        ("ppo.minibatch_size", a.ppo.minibatch_size.to_string()),
        ("ppo.value_coef", a.ppo.value_coef.to_string()),
        ("ppo.max_grad_norm", a.ppo.max_grad_norm.to_string()),
        ("ppo.normalize_advantages", a.ppo.normalize_advantages.to_string()),
        ("ppo.reinit_critic", a.ppo.reinit_critic.to_string()),
        ("dqn.replay_capacity", a.dqn.replay_capacity.to_string()),
        ("dqn.eps_start", a.dqn.eps_start.to_string()),
        ("dqn.eps_end", a.dqn.eps_end.to_string()),
        ("dqn.eps_decay_steps", a.dqn.eps_decay_steps.to_string()),
        ("dqn.target_tau", a.dqn.target_tau.to_string()),
        ("dqn.target_interval", a.dqn.target_interval.to_string()),
        ("dqn.seed_steps", a.dqn.seed_steps.to_string()),
        ("dqn.train_every", a.dqn.train_every.to_string()),
        ("dqn.gradient_steps", a.dqn.gradient_steps.to_string()),
    ];
    let mut out = String::from("# resolved empower-lab config\n");
    let mut seen = HashSet::new();
    for (k, v) in values {
        debug_assert!(KEYS.contains(&k) && seen.insert(k));
        out.push_str(&format!("{k} = {v}\n"));
    }
    out
}
