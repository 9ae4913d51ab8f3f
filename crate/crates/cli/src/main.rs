use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Deserialize;

use qbench::harness::{
    emit_tables, estimate_hardware, export_qasm, load_runs, run_grid, select_comparable_pair, summarize, write_csv,
    Family, GridSpec, RatioMode, RatioRow, SweepOptions, Task,
};
use qbench::models::ModelSpec;
use qbench::qasm::read_hardware_times;
use qbench::rl::DqnConfig;
use qbench::statevector::EmbeddingKind;
use qbench::training::{SlConfig, SplitMode};

#[derive(Parser)]
#[command(name = "qbench", version, about = "Train dense networks and simulated variational circuits side by side")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Supervised classification sweeps (iris, wine, wdbc).
    Sl(SweepArgs),
    /// Deep Q-learning sweeps on the seeded Frozen Lake.
    Rl(SweepArgs),
    /// Write the circuits logged during a sweep as OpenQASM 2 files.
    ExportQasm {
        #[arg(long)]
        run: PathBuf,
    },
    /// Extrapolate training time on hardware from measured per-circuit times.
    EstimateHw {
        #[arg(long)]
        run: PathBuf,
        /// CSV with columns circuit_id,hardware_seconds.
        #[arg(long)]
        hw_times: PathBuf,
        /// ratio-of-means or mean-of-ratios.
        #[arg(long, default_value = "ratio-of-means")]
        mode: String,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// iris, wine, wdbc or frozenlake (rl defaults to frozenlake).
    #[arg(long)]
    task: Option<String>,
    /// Restrict to one model family: nn or vqc.
    #[arg(long)]
    family: Option<String>,
    /// Run the full hyperparameter grid (default).
    #[arg(long, conflicts_with = "single")]
    grid: bool,
    /// One configuration, e.g. `nn:9`, `nn:6,6`, `vqc:ang:2`, `vqc:amp:3`.
    #[arg(long)]
    single: Option<String>,
    /// Seeds as `0-9` or `0,3,5`.
    #[arg(long, default_value = "0-9")]
    seeds: String,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Reuse completed runs found in the output directory.
    #[arg(long)]
    resume: bool,
    /// Force the compared pair, as `NN,VQC` (model id, slug or label).
    #[arg(long)]
    pair_override: Option<String>,
    /// Minimum mean score for pair selection (task default if omitted).
    #[arg(long)]
    threshold: Option<f64>,
    /// TOML file with `[sl]` and `[rl]` tables overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Share one data partition, drawn with this seed, across all runs.
    #[arg(long)]
    split_seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "QBENCH_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Skip circuit logging for VQC runs.
    #[arg(long)]
    no_circuit_log: bool,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    sl: SlConfig,
    rl: DqnConfig,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = s.split_once('-') {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty seed range {s}");
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse().with_context(|| format!("bad seed '{p}'"))).collect()
}

fn parse_model(task: Task, s: &str) -> Result<ModelSpec> {
    let (d, k) = task.io_dims();
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["nn", hidden] => {
            let sizes = hidden.split(',').map(|h| h.trim().parse::<usize>()).collect::<Result<Vec<_>, _>>()?;
            Ok(ModelSpec::nn(d, &sizes, k))
        }
        ["vqc", enc, layers] => {
            let enc = match enc.to_ascii_lowercase().as_str() {
                "ang" | "angle" => EmbeddingKind::Angle,
                "amp" | "amplitude" => EmbeddingKind::Amplitude,
                other => bail!("unknown embedding '{other}'"),
            };
            Ok(ModelSpec::vqc(enc, d, layers.parse()?, k)?)
        }
        _ => bail!("model must look like nn:9, nn:6,6 or vqc:ang:2, got '{s}'"),
    }
}

/// Score at which a model counts as well-performing when picking the pair.
fn default_threshold(task: Task) -> f64 {
    match task {
        Task::Iris => 0.96,
        Task::Wine => 0.97,
        Task::Wdbc => 0.96,
        Task::FrozenLake => 0.5,
    }
}

fn sweep(args: SweepArgs, rl: bool) -> Result<()> {
    let task: Task = match (&args.task, rl) {
        (Some(t), _) => t.parse()?,
        (None, true) => Task::FrozenLake,
        (None, false) => bail!("--task is required for sl"),
    };
    if task.is_rl() != rl {
        bail!("task {task} belongs to the `{}` subcommand", if task.is_rl() { "rl" } else { "sl" });
    }
    let family: Option<Family> = args.family.as_deref().map(str::parse).transpose()?;
    let file: FileConfig = match &args.config {
        Some(p) => toml::from_str(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => FileConfig::default(),
    };
    let mut opts = SweepOptions::new(&args.out_dir);
    opts.seeds = parse_seeds(&args.seeds)?;
    opts.resume = args.resume;
    opts.workers = args.workers;
    opts.sl = file.sl;
    opts.rl = file.rl;
    if let Some(s) = args.split_seed {
        opts.sl.split = SplitMode::Fixed(s);
    }
    if args.no_circuit_log {
        opts.log_circuits_seed = None;
    }

    let configs = match &args.single {
        Some(m) => vec![parse_model(task, m)?],
        None => GridSpec::for_task(task).configs(family)?,
    };
    info!("{task}: {} configurations x {} seeds", configs.len(), opts.seeds.len());
    let report = run_grid(task, &configs, &opts)?;
    for f in &report.failures {
        warn!("run {} failed: {}", f.stem, f.message);
    }
    println!(
        "{task}: {} runs completed ({} reused), {} failed",
        report.records.len(),
        report.resumed,
        report.failures.len()
    );
    report_tables(&args.out_dir, task, args.threshold, args.pair_override.as_deref())
}

/// Re-aggregates everything on disk for `task` so tables always reflect
/// the raw run files.
fn report_tables(root: &Path, task: Task, threshold: Option<f64>, pair_override: Option<&str>) -> Result<()> {
    let records: Vec<_> = load_runs(root)?.into_iter().filter(|r| r.task().ok() == Some(task)).collect();
    let rows = summarize(&records)?;
    for r in &rows {
        println!(
            "  {:<24} params {:>4}  score {:.3} [{:.3}, {:.3}]  train {:>9.2}s{}",
            r.label,
            r.params,
            r.score_mean,
            r.score_low,
            r.score_high,
            r.train_seconds_mean,
            r.solved.map(|s| format!("  solved {s}/{}", r.runs)).unwrap_or_default()
        );
    }
    let threshold = threshold.unwrap_or_else(|| default_threshold(task));
    let overrides = pair_override
        .map(|p| p.split_once(',').map(|(n, v)| (n.trim(), v.trim())).context("--pair-override takes NN,VQC"))
        .transpose()?;
    let mut ratios = Vec::new();
    let has_both = rows.iter().any(|r| r.family == Family::Nn) && rows.iter().any(|r| r.family == Family::Vqc);
    if has_both {
        match select_comparable_pair(&rows, threshold, overrides) {
            Ok(pair) => {
                println!("  at >= {threshold}: NN candidates {:?}", pair.nn_candidates);
                println!("  at >= {threshold}: VQC candidates {:?}", pair.vqc_candidates);
                let ratio = RatioRow::new(task, &pair.nn, &pair.vqc, None);
                println!(
                    "  pair {} / {}: parameter ratio {:.3}, training-time ratio {:.3}",
                    pair.nn.label, pair.vqc.label, ratio.parameter_ratio, ratio.time_ratio
                );
                ratios.push(ratio);
            }
            Err(e) => warn!("no comparable pair: {e}"),
        }
    }
    let tables = root.join("tables");
    for path in emit_tables(&tables, &rows, &[])? {
        println!("  wrote {}", path.display());
    }
    if !ratios.is_empty() {
        let path = tables.join(format!("{task}_ratios.csv"));
        write_csv(&path, &ratios)?;
        println!("  wrote {}", path.display());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Sl(a) => sweep(a, false),
        Command::Rl(a) => sweep(a, true),
        Command::ExportQasm { run } => {
            let exported = export_qasm(&run)?;
            if exported.is_empty() {
                warn!("no circuit logs under {}", run.display());
            }
            for (stem, n) in exported {
                println!("{stem}: {n} circuits");
            }
            Ok(())
        }
        Command::EstimateHw { run, hw_times, mode } => {
            let mode: RatioMode = mode.parse()?;
            let hw = read_hardware_times(&hw_times)?;
            let rows = estimate_hardware(&run, &hw, mode)?;
            for r in &rows {
                println!(
                    "{}: {} circuits, ratio {:.3} (per-circuit {:.3}); simulator {:.1}s -> hardware {:.1}s [{:.1}, {:.1}]",
                    r.model,
                    r.matched_circuits,
                    r.ratio_of_means,
                    r.mean_of_ratios,
                    r.sim_train_mean,
                    r.hw_train_mean,
                    r.hw_train_low,
                    r.hw_train_high
                );
            }
            let path = run.join("tables").join("hw_estimates.csv");
            write_csv(&path, &rows)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds() {
        assert_eq!(parse_seeds("0-9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("1,4").unwrap(), vec![1, 4]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert!(parse_seeds("5-2").is_err());
    }

    #[test]
    fn models() {
        assert_eq!(parse_model(Task::Iris, "nn:9").unwrap().id(), "NN-75");
        assert_eq!(parse_model(Task::Wine, "nn:6").unwrap().id(), "NN-105");
        assert_eq!(parse_model(Task::Iris, "vqc:ang:2").unwrap().id(), "VQC-28");
        assert_eq!(parse_model(Task::Wdbc, "vqc:amp:4").unwrap().id(), "VQC-63");
        assert!(parse_model(Task::Iris, "cnn:3").is_err());
    }

    #[test]
    fn config_file() {
        let c: FileConfig = toml::from_str("[sl]\nepochs = 3\n[rl]\nepisodes = 7\n").unwrap();
        assert_eq!((c.sl.epochs, c.sl.batch_size, c.rl.episodes, c.rl.batch_size), (3, 8, 7, 16));
        let c: FileConfig = toml::from_str("[sl]\nsplit = { fixed = 4 }\n").unwrap();
        assert_eq!(c.sl.split, SplitMode::Fixed(4));
    }
}
