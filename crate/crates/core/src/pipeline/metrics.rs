use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::PipelineError;

pub const CSV_HEADER: &str =
    "run_id,seed,phase,algorithm,pretrain_kind,horizon_spec,goal,env_steps,mean_return,std_return,wallclock_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        }
    }
}

/// One evaluation point of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub run_id: String,
    pub seed: u64,
    pub phase: Phase,
    pub algorithm: String,
    pub pretrain_kind: String,
    pub horizon_spec: String,
    /// None during pre-training, which has no goal.
    pub goal: Option<usize>,
    pub env_steps: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub wallclock_s: f64,
}

impl MetricsRecord {
    pub fn to_csv_row(&self) -> String {
        let goal = self.goal.map_or_else(|| "none".to_string(), |g| g.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6}",
            self.run_id,
            self.seed,
            self.phase.name(),
            self.algorithm,
            self.pretrain_kind,
            self.horizon_spec,
            goal,
            self.env_steps,
            self.mean_return,
            self.std_return,
            self.wallclock_s
        )
    }

    /// Ordering used for every CSV: run, phase, then step.
    pub fn sort_key(&self) -> (String, Phase, u64) {
        (self.run_id.clone(), self.phase, self.env_steps)
    }
}

pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by_key(|a| a.sort_key());
}

pub fn to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.to_csv_row());
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRecord>, PipelineError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        Some(h) => return Err(PipelineError::Csv(format!("unexpected header {h:?}"))),
        None => return Err(PipelineError::Csv("empty metrics file".into())),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| PipelineError::Csv(format!("row {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(bad("column count"));
            }
            let phase = match f[2] {
                "pretrain" => Phase::Pretrain,
                "finetune" => Phase::Finetune,
                _ => return Err(bad("phase")),
            };
            Ok(MetricsRecord {
                run_id: f[0].to_string(),
                seed: f[1].parse().map_err(|_| bad("seed"))?,
                phase,
                algorithm: f[3].to_string(),
                pretrain_kind: f[4].to_string(),
                horizon_spec: f[5].to_string(),
                goal: match f[6] {
                    "none" => None,
                    g => Some(g.parse().map_err(|_| bad("goal"))?),
                },
                env_steps: f[7].parse().map_err(|_| bad("env_steps"))?,
                mean_return: f[8].parse().map_err(|_| bad("mean_return"))?,
                std_return: f[9].parse().map_err(|_| bad("std_return"))?,
                wallclock_s: f[10].parse().map_err(|_| bad("wallclock_s"))?,
            })
        })
        .collect()
}

/// First evaluated step whose mean return reaches `threshold`.
pub fn steps_to_threshold(series: &[MetricsRecord], threshold: f64) -> Option<u64> {
    series
        .iter()
        .filter(|r| r.phase == Phase::Finetune && r.mean_return >= threshold)
        .map(|r| r.env_steps)
        .min()
}

/// Median with runs that never reached the threshold counted as infinite.
pub fn median_steps(values: &[Option<u64>]) -> f64 {
    let mut v: Vec<f64> = values.iter().map(|x| x.map_or(f64::INFINITY, |s| s as f64)).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else if v[n / 2].is_infinite() {
        f64::INFINITY
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mean and standard deviation of the mean of a sample.
pub fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A point of an aggregated learning curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub group: String,
    pub env_steps: u64,
    pub mean: f64,
    pub sem: f64,
    pub n: usize,
}

/// Pools fine-tuning records by `group_of` and step, across goals and seeds.
pub fn aggregate(records: &[MetricsRecord], group_of: impl Fn(&MetricsRecord) -> String) -> Vec<CurvePoint> {
    let mut pools: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == Phase::Finetune) {
        pools.entry((group_of(r), r.env_steps)).or_default().push(r.mean_return);
    }
    pools
        .into_iter()
        .map(|((group, env_steps), mut values)| {
            // summation order must not depend on scheduling
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (mean, sem) = mean_and_sem(&values);
            CurvePoint {
                group,
                env_steps,
                mean,
                sem,
                n: values.len(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run: &str, steps: u64, ret: f64) -> MetricsRecord {
        MetricsRecord {
            run_id: run.into(),
            seed: 1,
            phase: Phase::Finetune,
            algorithm: "reinforce".into(),
            pretrain_kind: "none".into(),
            horizon_spec: "none".into(),
            goal: Some(3),
            env_steps: steps,
            mean_return: ret,
            std_return: 0.5,
            wallclock_s: 0.0,
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut rs = vec![rec("b", 10, 1.5), rec("a", 0, 30.25)];
        rs[0].goal = None;
        rs[0].phase = Phase::Pretrain;
        let text = to_csv(&rs);
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(parse_csv(&text).unwrap(), rs);
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\n1,2,3\n")).is_err());
    }

    #[test]
    fn threshold_and_median() {
        let s = vec![
            rec("a", 0, 1.0),
            rec("a", 5, 20.0),
            rec("a", 10, 28.0),
            rec("a", 15, 10.0),
        ];
        assert_eq!(steps_to_threshold(&s, 25.0), Some(10));
        assert_eq!(steps_to_threshold(&s, 31.0), None);
        assert_eq!(median_steps(&[Some(5), None, Some(1)]), 5.0);
        assert_eq!(median_steps(&[Some(5), Some(1)]), 3.0);
        assert!(median_steps(&[None, Some(1)]).is_infinite());
    }

    #[test]
    fn aggregation() {
        let rs = vec![rec("a", 0, 2.0), rec("b", 0, 2.0), rec("c", 0, 2.0)];
        let curve = aggregate(&rs, |_| "x".into());
        assert_eq!(curve.len(), 1);
        assert_eq!((curve[0].mean, curve[0].sem, curve[0].n), (2.0, 0.0, 3));
        let (m, sem) = mean_and_sem(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((sem - 1.0).abs() < 1e-12);
    }
}
