use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;

use super::config::{ExperimentConfig, Variant};
use super::metrics::{sort_records, steps_to_threshold, MetricsRecord, Phase};
use super::run::{finetune, oracle_return, pretrain, Experiment, Pretrained};
use super::PipelineError;

/// One fine-tuning run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: String,
    /// Index into the config's variant list.
    pub variant_index: usize,
    pub variant: Variant,
    pub seed: u64,
    pub goal: usize,
}

/// Every (variant, goal, seed) combination, in that nesting order.
pub fn plan(config: &ExperimentConfig, n_states: usize) -> Result<Vec<RunSpec>, PipelineError> {
    let goals = config.goal_sweep.goals(n_states, config.goal_seed)?;
    let mut runs = Vec::with_capacity(config.variants.len() * goals.len() * config.seeds.len());
    for (variant_index, variant) in config.variants.iter().enumerate() {
        for &goal in &goals {
            for &seed in &config.seeds {
                runs.push(RunSpec {
                    run_id: format!("{variant}-g{goal}-s{seed}"),
                    variant_index,
                    variant: *variant,
                    seed,
                    goal,
                });
            }
        }
    }
    let distinct: HashSet<&str> = runs.iter().map(|r| r.run_id.as_str()).collect();
    if distinct.len() != runs.len() {
        return Err(PipelineError::Config("duplicate variants or seeds".into()));
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub run_id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutcome {
    pub pretrain_records: Vec<MetricsRecord>,
    /// Fine-tuning records of the runs executed now, sorted.
    pub records: Vec<MetricsRecord>,
    pub failures: Vec<RunFailure>,
    pub skipped: usize,
}

/// Runs every planned run not in `skip` on a pool of `workers` threads.
/// Pre-training is shared by all runs of a (variant, seed) pair. Results do
/// not depend on `workers`; failed runs are reported, not dropped.
pub fn sweep(exp: &Experiment, workers: usize, skip: &HashSet<String>) -> Result<SweepOutcome, PipelineError> {
    let cfg = exp.config();
    let runs: Vec<RunSpec> = plan(cfg, exp.mdp().n_states())?;
    let total = runs.len();
    let pending: Vec<RunSpec> = runs.into_iter().filter(|r| !skip.contains(&r.run_id)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;

    let mut keys: Vec<(usize, u64)> = pending.iter().map(|r| (r.variant_index, r.seed)).collect();
    keys.sort_unstable();
    keys.dedup();

    pool.install(|| {
        // maps first, so parallel pre-training runs never race to fill the cache
        for &(vi, _) in &keys {
            if let Some(h) = cfg.variants[vi].horizon {
                exp.empowerment_map(&h)?;
            }
        }
        let pretrained: HashMap<(usize, u64), Result<Pretrained, String>> = keys
            .par_iter()
            .map(|&(vi, seed)| {
                let out = pretrain(exp, &cfg.variants[vi], seed, None).map_err(|e| e.to_string());
                ((vi, seed), out)
            })
            .collect();

        let results: Vec<(String, Result<Vec<MetricsRecord>, String>)> = pending
            .par_iter()
            .map(|run| {
                let out = match &pretrained[&(run.variant_index, run.seed)] {
                    Ok(p) => finetune(exp, run, &p.checkpoint).map_err(|e| e.to_string()),
                    Err(e) => Err(format!("pre-training failed: {e}")),
                };
                (run.run_id.clone(), out)
            })
            .collect();

        let mut outcome = SweepOutcome {
            skipped: total - pending.len(),
            ..Default::default()
        };
        for key in &keys {
            if let Ok(Pretrained { record: Some(r), .. }) = &pretrained[key] {
                outcome.pretrain_records.push(r.clone());
            }
        }
        for (run_id, result) in results {
            match result {
                Ok(records) => outcome.records.extend(records),
                Err(error) => outcome.failures.push(RunFailure { run_id, error }),
            }
        }
        sort_records(&mut outcome.pretrain_records);
        sort_records(&mut outcome.records);
        outcome.failures.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(outcome)
    })
}

/// Runs whose fine-tuning series is complete in `records`.
pub fn completed_runs(records: &[MetricsRecord], evals_per_run: usize) -> HashSet<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Finetune) {
        *counts.entry(r.run_id.as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .filter(|(_, c)| *c == evals_per_run)
        .map(|(id, _)| id.to_string())
        .collect()
}

/// Scalar outcome of one fine-tuning run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run_id: String,
    pub pretrain_kind: String,
    pub horizon_spec: String,
    pub seed: u64,
    pub goal: usize,
    pub oracle_return: f64,
    /// None when the threshold was never reached.
    pub steps_to_threshold: Option<u64>,
    pub final_return: f64,
}

impl RunSummary {
    /// Grouping key shared by all runs of one variant.
    pub fn variant_key(&self) -> String {
        format!("{}@{}", self.pretrain_kind, self.horizon_spec)
    }
}

/// Steps-to-threshold against `fraction` of each goal's oracle return.
pub fn summarize(exp: &Experiment, records: &[MetricsRecord], fraction: f64) -> Vec<RunSummary> {
    let mut runs: BTreeMap<&str, Vec<MetricsRecord>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.phase == Phase::Finetune && r.goal.is_some())
    {
        runs.entry(r.run_id.as_str()).or_default().push(r.clone());
    }
    let mut oracles: HashMap<usize, f64> = HashMap::new();
    runs.into_iter()
        .map(|(run_id, mut series)| {
            series.sort_by_key(|r| r.env_steps);
            let first = &series[0];
            let goal = first.goal.expect("filtered above");
            let oracle = *oracles.entry(goal).or_insert_with(|| oracle_return(exp.mdp(), goal));
            RunSummary {
                run_id: run_id.to_string(),
                pretrain_kind: first.pretrain_kind.clone(),
                horizon_spec: first.horizon_spec.clone(),
                seed: first.seed,
                goal,
                oracle_return: oracle,
                steps_to_threshold: steps_to_threshold(&series, fraction * oracle),
                final_return: series.last().expect("non-empty").mean_return,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::Algorithm;
    use crate::empowerment::HorizonSpec;
    use crate::pipeline::GoalSweep;

    #[test]
    fn plan_is_a_cartesian_product() {
        let mut c = ExperimentConfig::new(Algorithm::Reinforce);
        c.variants = vec![
            Variant::scratch(),
            Variant::maximizing(HorizonSpec::discounted_default()),
        ];
        c.seeds = vec![0, 1, 2];
        c.goal_sweep = GoalSweep::All;
        let runs = plan(&c, 64).unwrap();
        assert_eq!(runs.len(), 384);
        assert_eq!(runs[0].run_id, "none-g0-s0");
        c.seeds = vec![1, 1];
        assert!(plan(&c, 64).is_err());
    }

    #[test]
    fn completed_runs_need_full_series() {
        let rec = |id: &str, steps| MetricsRecord {
            run_id: id.into(),
            seed: 0,
            phase: Phase::Finetune,
            algorithm: "reinforce".into(),
            pretrain_kind: "none".into(),
            horizon_spec: "none".into(),
            goal: Some(0),
            env_steps: steps,
            mean_return: 0.0,
            std_return: 0.0,
            wallclock_s: 0.0,
        };
        let rs = vec![rec("a", 0), rec("a", 10), rec("b", 0)];
        let done = completed_runs(&rs, 2);
        assert!(done.contains("a") && !done.contains("b"));
    }
}
