//! `empower-lab`: empowerment maps, pre-training, fine-tuning, sweeps and plots.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

mod config;
mod svg;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use empower_core::empowerment::{empowerment_map, EmpowermentOptions, HorizonSpec};
use empower_core::grid::{SlipSpec, TabularMdp};
use empower_core::nn::Checkpoint;
use empower_core::pipeline::{
    aggregate, completed_runs, finetune, parse_csv, plan, pretrain, resolve_layout, sort_records, summarize, sweep,
    to_csv, Experiment, ExperimentConfig, MetricsRecord, RunSpec, CSV_HEADER,
};

use config::ConfigDocument;

#[derive(Parser)]
#[command(
    name = "empower-lab",
    version,
    about = "Empowerment-based pre-training experiments on gridworlds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-state empowerment as CSV and an SVG heatmap.
    EmpowerMap(MapArgs),
    /// Pre-train one agent per seed and save checkpoints.
    Pretrain(RunArgs),
    /// Fine-tune on one goal from a checkpoint (or fresh pre-training).
    Finetune(FinetuneArgs),
    /// Goals x seeds x variants, with shared pre-training.
    Sweep(SweepArgs),
    /// Learning curves with std-of-mean bands from metrics CSVs.
    Plot(PlotArgs),
}

#[derive(Args)]
struct MapArgs {
    /// Layout file, or builtin:<name>.
    #[arg(long, default_value = "builtin:open10")]
    layout: String,
    #[arg(long, default_value_t = 0.0)]
    slip: f64,
    /// one-step, n:<n> or discounted[:lambda[:H[:k_max]]].
    #[arg(long, default_value = "discounted")]
    horizon: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` experiment document.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the document's seeds with a single seed.
    #[arg(long, env = "EMPOWER_LAB_SEED")]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    layout: Option<String>,
    #[arg(long)]
    slip: Option<f64>,
    /// Horizon of capacity-maximizing variants given without one.
    #[arg(long)]
    horizon: Option<String>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    goal: usize,
    /// Checkpoint to start from; pre-trains the first variant when absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Skip runs whose series is already complete in the out-dir.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Metrics CSVs (repeatable).
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated CSV columns that define a series.
    #[arg(long, default_value = "pretrain_kind,horizon_spec")]
    group_by: String,
    #[arg(long, default_value = "curves.svg")]
    out: PathBuf,
    #[arg(long, default_value = "fine-tuning return")]
    title: String,
}

/// Error carrying its exit code.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

trait Classify<T> {
    fn usage(self) -> std::result::Result<T, Failure>;
    fn runtime(self) -> std::result::Result<T, Failure>;
}

impl<T> Classify<T> for Result<T> {
    fn usage(self) -> std::result::Result<T, Failure> {
        self.map_err(Failure::Usage)
    }
    fn runtime(self) -> std::result::Result<T, Failure> {
        self.map_err(Failure::Runtime)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::EmpowerMap(a) => cmd_empower_map(&a),
        Command::Pretrain(a) => cmd_pretrain(&a),
        Command::Finetune(a) => cmd_finetune(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Plot(a) => cmd_plot(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_empower_map(a: &MapArgs) -> Outcome {
    let (mdp, spec) = (|| -> Result<_> {
        let layout = resolve_layout(&a.layout)?;
        let slip = SlipSpec::new(a.slip).map_err(|e| anyhow!("slip must lie in [0, 1), got {}", e.0))?;
        let spec: HorizonSpec = a.horizon.parse()?;
        Ok((TabularMdp::build(&layout, slip), spec))
    })()
    .usage()?;
    let map = empowerment_map(&mdp, &spec, &EmpowermentOptions::default())
        .map_err(anyhow::Error::from)
        .runtime()?;
    (|| -> Result<()> {
        fs::create_dir_all(&a.out)?;
        write(&a.out.join("empowerment.csv"), &map.to_csv(&mdp))?;
        write(&a.out.join("empowerment.svg"), &svg::heatmap(&mdp, &map))?;
        println!(
            "{} states, {}: min {:.6} max {:.6} bits, argmax state {}",
            mdp.n_states(),
            spec,
            map.min(),
            map.max(),
            map.argmax()
        );
        Ok(())
    })()
    .runtime()
}

/// Reads the document, applies flag overrides, validates, and echoes the
/// resolved config into the out-dir.
fn load_experiment(a: &RunArgs) -> std::result::Result<Experiment, Failure> {
    let exp = (|| -> Result<Experiment> {
        let mut doc = match &a.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                ConfigDocument::parse(&text).with_context(|| format!("config {}", path.display()))?
            }
            None => ConfigDocument::default(),
        };
        if let Some(l) = &a.layout {
            doc.set_override("layout", l)?;
        }
        if let Some(s) = a.slip {
            doc.set_override("slip", &s.to_string())?;
        }
        if let Some(h) = &a.horizon {
            doc.set_override("horizon", h)?;
        }
        let mut cfg: ExperimentConfig = doc.to_experiment(0)?;
        if let Some(seed) = a.seed {
            cfg.seeds = vec![seed];
        }
        Ok(Experiment::new(cfg)?)
    })()
    .usage()?;
    (|| -> Result<()> {
        fs::create_dir_all(&a.out)?;
        write(&a.out.join("config.txt"), &config::render(exp.config()))
    })()
    .runtime()?;
    Ok(exp)
}

fn cmd_pretrain(a: &RunArgs) -> Outcome {
    let exp = load_experiment(a)?;
    let variant = exp.config().variants[0];
    let mut records = Vec::new();
    for &seed in &exp.config().seeds {
        let p = pretrain(&exp, &variant, seed, None)
            .map_err(anyhow::Error::from)
            .runtime()?;
        let path = a.out.join(format!("pretrain-s{seed}.ckpt"));
        p.checkpoint.save(&path).map_err(anyhow::Error::from).runtime()?;
        println!("{variant} seed {seed}: {}", path.display());
        records.extend(p.record);
    }
    write(&a.out.join("pretrain.csv"), &to_csv(&records)).runtime()
}

fn cmd_finetune(a: &FinetuneArgs) -> Outcome {
    let exp = load_experiment(&a.run)?;
    if a.goal >= exp.mdp().n_states() {
        return Err(Failure::Usage(anyhow!(
            "goal {} out of range: layout has {} free cells",
            a.goal,
            exp.mdp().n_states()
        )));
    }
    let ck = match &a.checkpoint {
        Some(path) => Some(
            Checkpoint::load(path)
                .map_err(|e| anyhow!("checkpoint {}: {e}", path.display()))
                .usage()?,
        ),
        None => None,
    };
    let variant = exp.config().variants[0];
    let mut records = Vec::new();
    for &seed in &exp.config().seeds {
        let ck = match &ck {
            Some(c) => c.clone(),
            None => {
                pretrain(&exp, &variant, seed, None)
                    .map_err(anyhow::Error::from)
                    .runtime()?
                    .checkpoint
            }
        };
        let run = RunSpec {
            run_id: format!("{variant}-g{}-s{seed}", a.goal),
            variant_index: 0,
            variant,
            seed,
            goal: a.goal,
        };
        records.extend(finetune(&exp, &run, &ck).map_err(anyhow::Error::from).runtime()?);
    }
    sort_records(&mut records);
    if let Some(last) = records.last() {
        println!("goal {}: final mean return {:.3}", a.goal, last.mean_return);
    }
    write(&a.run.out.join("metrics.csv"), &to_csv(&records)).runtime()
}

fn read_records(path: &Path) -> Result<Vec<MetricsRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_sweep(a: &SweepArgs) -> Outcome {
    let exp = load_experiment(&a.run)?;
    let out = &a.run.out;
    let metrics_path = out.join("metrics.csv");
    let pretrain_path = out.join("pretrain.csv");
    let planned: BTreeSet<String> = plan(exp.config(), exp.mdp().n_states())
        .map_err(anyhow::Error::from)
        .usage()?
        .into_iter()
        .map(|r| r.run_id)
        .collect();
    let (mut kept, mut kept_pre) = (Vec::new(), Vec::new());
    if a.resume && metrics_path.exists() {
        let done = completed_runs(&read_records(&metrics_path).usage()?, exp.eval_points().len());
        kept = read_records(&metrics_path)
            .usage()?
            .into_iter()
            .filter(|r| done.contains(&r.run_id) && planned.contains(&r.run_id))
            .collect();
        if pretrain_path.exists() {
            kept_pre = read_records(&pretrain_path).usage()?;
        }
    }
    let skip = completed_runs(&kept, exp.eval_points().len());
    let outcome = sweep(&exp, a.workers, &skip).map_err(anyhow::Error::from).runtime()?;

    let mut records = kept;
    records.extend(outcome.records);
    sort_records(&mut records);
    let mut pre = kept_pre;
    for r in outcome.pretrain_records {
        if !pre.iter().any(|p| p.run_id == r.run_id) {
            pre.push(r);
        }
    }
    sort_records(&mut pre);
    let summaries = summarize(&exp, &records, exp.config().threshold_fraction);
    let mut summary =
        String::from("run_id,pretrain_kind,horizon_spec,seed,goal,oracle_return,steps_to_threshold,final_return\n");
    for s in &summaries {
        let steps = s
            .steps_to_threshold
            .map_or_else(|| "inf".to_string(), |v| v.to_string());
        summary.push_str(&format!(
            "{},{},{},{},{},{:.6},{},{:.6}\n",
            s.run_id, s.pretrain_kind, s.horizon_spec, s.seed, s.goal, s.oracle_return, steps, s.final_return
        ));
    }
    (|| -> Result<()> {
        write(&metrics_path, &to_csv(&records))?;
        write(&pretrain_path, &to_csv(&pre))?;
        write(&out.join("summary.csv"), &summary)?;
        let failures: String = outcome
            .failures
            .iter()
            .map(|f| format!("{}: {}\n", f.run_id, f.error))
            .collect();
        write(&out.join("failures.txt"), &failures)
    })()
    .runtime()?;
    println!(
        "{} runs planned, {} skipped, {} failed; {} rows in {}",
        planned.len(),
        outcome.skipped,
        outcome.failures.len(),
        records.len(),
        metrics_path.display()
    );
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!("run {} failed: {}", f.run_id, f.error);
        }
        return Err(Failure::Runtime(anyhow!("{} runs failed", outcome.failures.len())));
    }
    Ok(())
}

fn cmd_plot(a: &PlotArgs) -> Outcome {
    let columns: Vec<&str> = CSV_HEADER.split(',').collect();
    let keys: Vec<&str> = a.group_by.split(',').map(str::trim).collect();
    if let Some(bad) = keys.iter().find(|k| !columns.contains(k)) {
        return Err(Failure::Usage(anyhow!(
            "unknown grouping key {bad:?}; columns are {CSV_HEADER}"
        )));
    }
    let mut records = Vec::new();
    for path in &a.inputs {
        records.extend(read_records(path).usage()?);
    }
    if !records
        .iter()
        .any(|r| r.phase == empower_core::pipeline::Phase::Finetune)
    {
        return Err(Failure::Usage(anyhow!("no fine-tuning records in the input CSVs")));
    }
    let group = |r: &MetricsRecord| -> String {
        let row = r.to_csv_row();
        let fields: Vec<&str> = row.split(',').collect();
        keys.iter()
            .map(|k| fields[columns.iter().position(|c| c == k).expect("validated")])
            .collect::<Vec<_>>()
            .join("/")
    };
    let points = aggregate(&records, group);
    let svg = svg::curves(&points, &a.title);
    (|| -> Result<()> {
        if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write(&a.out, &svg)
    })()
    .runtime()?;
    let groups: BTreeSet<&str> = points.iter().map(|p| p.group.as_str()).collect();
    println!("{} series -> {}", groups.len(), a.out.display());
    Ok(())
}
