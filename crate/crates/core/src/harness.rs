//! Grid sweeps over model configurations and seeds, one persisted file per
//! run, bootstrap intervals and the comparison tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Checkpoint, ModelSpec};
use crate::qasm::{
    estimate_hw_training_time, join_timings, ratio_report, read_manifest, write_archive, CircuitLog, ConcreteCircuit,
    HardwareRow, ManifestRow, MANIFEST_FILE,
};
use crate::rl::{dqn_train, DqnConfig, RlMetrics};
use crate::statevector::EmbeddingKind;
use crate::training::{load_dataset, train_sl, DatasetName, SlConfig, SlMetrics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Iris,
    Wine,
    Wdbc,
    FrozenLake,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Iris, Task::Wine, Task::Wdbc, Task::FrozenLake];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Iris => "iris",
            Task::Wine => "wine",
            Task::Wdbc => "wdbc",
            Task::FrozenLake => "frozenlake",
        }
    }

    pub fn dataset(self) -> Option<DatasetName> {
        match self {
            Task::Iris => Some(DatasetName::Iris),
            Task::Wine => Some(DatasetName::Wine),
            Task::Wdbc => Some(DatasetName::Wdbc),
            Task::FrozenLake => None,
        }
    }

    pub fn is_rl(self) -> bool {
        self == Task::FrozenLake
    }

    /// (input features, outputs) of every model on this task.
    pub fn io_dims(self) -> (usize, usize) {
        match self {
            Task::Iris => (4, 3),
            Task::Wine => (13, 3),
            Task::Wdbc => (30, 2),
            Task::FrozenLake => (4, 4),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "iris" => Ok(Task::Iris),
            "wine" => Ok(Task::Wine),
            "wdbc" | "breastcancer" => Ok(Task::Wdbc),
            "frozenlake" | "rl" | "lake" => Ok(Task::FrozenLake),
            other => Err(Error::Config(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Nn,
    Vqc,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn" => Ok(Family::Nn),
            "vqc" => Ok(Family::Vqc),
            other => Err(Error::Config(format!("unknown model family '{other}'"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Nn => "nn",
            Family::Vqc => "vqc",
        })
    }
}

pub fn family_of(spec: &ModelSpec) -> Family {
    if spec.is_vqc() {
        Family::Vqc
    } else {
        Family::Nn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub task: Task,
    pub nn_hidden_layers: Vec<usize>,
    pub nn_nodes: Vec<usize>,
    pub vqc_encodings: Vec<EmbeddingKind>,
    pub vqc_layers: Vec<usize>,
}

impl GridSpec {
    pub fn for_task(task: Task) -> Self {
        let (nn_hidden_layers, nn_nodes, vqc_encodings) = match task {
            Task::Wdbc => (vec![1, 2], vec![3, 6, 9], vec![EmbeddingKind::Amplitude]),
            _ => (vec![1, 2, 3], vec![3, 6, 9, 12], vec![EmbeddingKind::Amplitude, EmbeddingKind::Angle]),
        };
        Self { task, nn_hidden_layers, nn_nodes, vqc_encodings, vqc_layers: (1..=6).collect() }
    }

    pub fn nn_configs(&self) -> Vec<ModelSpec> {
        let (d, k) = self.task.io_dims();
        let mut out = Vec::new();
        for &layers in &self.nn_hidden_layers {
            for &nodes in &self.nn_nodes {
                out.push(ModelSpec::nn(d, &vec![nodes; layers], k));
            }
        }
        out
    }

    pub fn vqc_configs(&self) -> Result<Vec<ModelSpec>> {
        let (d, k) = self.task.io_dims();
        let mut out = Vec::new();
        for &enc in &self.vqc_encodings {
            for &layers in &self.vqc_layers {
                out.push(ModelSpec::vqc(enc, d, layers, k)?);
            }
        }
        Ok(out)
    }

    pub fn configs(&self, family: Option<Family>) -> Result<Vec<ModelSpec>> {
        let mut out = Vec::new();
        if family != Some(Family::Vqc) {
            out.extend(self.nn_configs());
        }
        if family != Some(Family::Nn) {
            out.extend(self.vqc_configs()?);
        }
        Ok(out)
    }
}

/// Metrics of one finished run, either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RunRecord {
    Sl(SlMetrics),
    Rl(RlMetrics),
}

impl RunRecord {
    pub fn task(&self) -> Result<Task> {
        match self {
            RunRecord::Sl(m) => m.task.parse(),
            RunRecord::Rl(m) => m.task.parse(),
        }
    }

    pub fn model(&self) -> &ModelSpec {
        match self {
            RunRecord::Sl(m) => &m.model,
            RunRecord::Rl(m) => &m.model,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            RunRecord::Sl(m) => m.seed,
            RunRecord::Rl(m) => m.seed,
        }
    }

    /// Test accuracy for classification, test reward for the lake.
    pub fn score(&self) -> f64 {
        match self {
            RunRecord::Sl(m) => m.test_accuracy,
            RunRecord::Rl(m) => m.test_reward,
        }
    }

    pub fn training_seconds(&self) -> f64 {
        match self {
            RunRecord::Sl(m) => m.training_seconds,
            RunRecord::Rl(m) => m.training_seconds,
        }
    }

    pub fn circuit_seconds(&self) -> f64 {
        match self {
            RunRecord::Sl(m) => m.circuit_seconds,
            RunRecord::Rl(m) => m.circuit_seconds,
        }
    }
}

pub fn run_stem(task: Task, spec: &ModelSpec, seed: u64) -> String {
    format!("{}_{}_seed{}", task, spec.slug(), seed)
}

/// Where a sweep keeps its files.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.root.join("runs")
    }

    pub fn circuits_dir(&self) -> PathBuf {
        self.root.join("circuits")
    }

    pub fn qasm_dir(&self) -> PathBuf {
        self.root.join("qasm")
    }

    pub fn metrics_path(&self, stem: &str) -> PathBuf {
        self.runs_dir().join(format!("{stem}.json"))
    }

    pub fn checkpoint_path(&self, stem: &str) -> PathBuf {
        self.runs_dir().join(format!("{stem}.model.json"))
    }

    pub fn circuit_log_path(&self, stem: &str) -> PathBuf {
        self.circuits_dir().join(format!("{stem}.json"))
    }
}

fn write_json_atomic<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_run(path: &Path) -> Result<RunRecord> {
    Ok(serde_json::from_slice(&std::fs::read(path)?)?)
}

/// Every persisted run under `root`, sorted by file name.
pub fn load_runs(root: &Path) -> Result<Vec<RunRecord>> {
    let dir = RunLayout::new(root).runs_dir();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".model.json")
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| load_run(p)).collect()
}

pub fn load_circuit_logs(root: &Path) -> Result<BTreeMap<String, Vec<ConcreteCircuit>>> {
    let dir = RunLayout::new(root).circuits_dir();
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(&dir)? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            out.insert(stem, serde_json::from_slice(&std::fs::read(&path)?)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub resume: bool,
    /// Worker threads; 0 lets the pool pick.
    pub workers: usize,
    pub sl: SlConfig,
    pub rl: DqnConfig,
    /// Seed whose VQC runs record executed circuits.
    pub log_circuits_seed: Option<u64>,
    pub log_samples: usize,
    pub log_per_sample: usize,
}

impl SweepOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            seeds: (0..10).collect(),
            resume: false,
            workers: 0,
            sl: SlConfig::default(),
            rl: DqnConfig::default(),
            log_circuits_seed: Some(0),
            log_samples: 5,
            log_per_sample: 16,
        }
    }
}

/// Trains one configuration for one seed and persists its metrics,
/// checkpoint and (when requested) the logged circuits.
pub fn run_one(task: Task, spec: &ModelSpec, seed: u64, opts: &SweepOptions) -> Result<RunRecord> {
    let layout = RunLayout::new(&opts.out_dir);
    let stem = run_stem(task, spec, seed);
    let mut log = (spec.is_vqc() && opts.log_circuits_seed == Some(seed)).then(|| {
        let total = if task.is_rl() { opts.rl.episodes } else { opts.sl.epochs };
        CircuitLog::new(format!("{task}_{}", spec.slug()), total, opts.log_samples).with_limit(opts.log_per_sample)
    });
    let (record, checkpoint): (RunRecord, Checkpoint) = match task.dataset() {
        Some(name) => {
            let ds = load_dataset(name, opts.sl.split_seed(seed))?;
            let run = train_sl(spec, &ds, &opts.sl, seed, log.as_mut())?;
            (RunRecord::Sl(run.metrics), run.best)
        }
        None => {
            let run = dqn_train(spec, &opts.rl, seed, log.as_mut())?;
            (RunRecord::Rl(run.metrics), run.policy)
        }
    };
    if let Some(log) = log {
        write_json_atomic(&layout.circuit_log_path(&stem), &log.into_circuits())?;
    }
    write_json_atomic(&layout.checkpoint_path(&stem), &checkpoint)?;
    write_json_atomic(&layout.metrics_path(&stem), &record)?;
    Ok(record)
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub stem: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub records: Vec<RunRecord>,
    pub resumed: usize,
    pub failures: Vec<RunFailure>,
}

/// Runs every configuration × seed on a bounded pool. Failures are
/// collected per run; with `resume`, runs already on disk are reused.
pub fn run_grid(task: Task, configs: &[ModelSpec], opts: &SweepOptions) -> Result<SweepReport> {
    let layout = RunLayout::new(&opts.out_dir);
    std::fs::create_dir_all(layout.runs_dir())?;
    let jobs: Vec<(&ModelSpec, u64)> = configs.iter().flat_map(|c| opts.seeds.iter().map(move |&s| (c, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<(String, bool, Result<RunRecord>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, seed)| {
                let stem = run_stem(task, spec, seed);
                let path = layout.metrics_path(&stem);
                if opts.resume && path.exists() {
                    match load_run(&path) {
                        Ok(r) => return (stem, true, Ok(r)),
                        Err(e) => warn!("{stem}: ignoring unreadable run file ({e}); re-running"),
                    }
                }
                let res = run_one(task, spec, seed, opts);
                match &res {
                    Ok(r) => info!("{stem}: score {:.4} in {:.1}s", r.score(), r.training_seconds()),
                    Err(e) => warn!("{stem}: failed: {e}"),
                }
                (stem, false, res)
            })
            .collect()
    });
    let mut report = SweepReport::default();
    for (stem, resumed, res) in outcomes {
        match res {
            Ok(r) => {
                report.resumed += usize::from(resumed);
                report.records.push(r);
            }
            Err(e) => report.failures.push(RunFailure { stem, message: e.to_string() }),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn margin(&self) -> f64 {
        (self.high - self.mean).max(self.mean - self.low)
    }
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Running mean; exact for constant input.
fn mean_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().enumerate().fold(0.0, |m, (i, v)| m + (v - m) / (i + 1) as f64)
}

/// Percentile bootstrap interval of the mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<Interval> {
    if values.is_empty() {
        return Err(Error::Empty("bootstrap input"));
    }
    if resamples == 0 || !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!("bootstrap needs resamples > 0 and level in [0,1), got {resamples}, {level}")));
    }
    let n = values.len();
    let mean = mean_of(values.iter().copied());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats: Vec<f64> = (0..resamples).map(|_| mean_of((0..n).map(|_| values[rng.gen_range(0..n)]))).collect();
    stats.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Ok(Interval { mean, low: quantile_sorted(&stats, alpha), high: quantile_sorted(&stats, 1.0 - alpha) })
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_LEVEL: f64 = 0.95;

pub fn default_ci(values: &[f64]) -> Result<Interval> {
    bootstrap_ci(values, BOOTSTRAP_RESAMPLES, BOOTSTRAP_LEVEL, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: Task,
    pub family: Family,
    pub model_id: String,
    pub slug: String,
    pub label: String,
    pub params: usize,
    pub runs: usize,
    pub score_mean: f64,
    pub score_low: f64,
    pub score_high: f64,
    pub train_seconds_mean: f64,
    pub train_seconds_low: f64,
    pub train_seconds_high: f64,
    pub circuit_seconds_mean: f64,
    /// Lake runs whose greedy policy reaches the optimal return.
    pub solved: Option<usize>,
}

/// One row per (task, configuration), ordered by family then size.
pub fn summarize(records: &[RunRecord]) -> Result<Vec<SummaryRow>> {
    let mut groups: BTreeMap<(Task, Family, usize, String), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let spec = r.model();
        groups.entry((r.task()?, family_of(spec), spec.param_count(), spec.slug())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((task, family, params, slug), runs)| {
            let spec = runs[0].model();
            let scores: Vec<f64> = runs.iter().map(|r| r.score()).collect();
            let times: Vec<f64> = runs.iter().map(|r| r.training_seconds()).collect();
            let score = default_ci(&scores)?;
            let time = default_ci(&times)?;
            let solved = task.is_rl().then(|| {
                runs.iter().filter(|r| matches!(r, RunRecord::Rl(m) if m.solved)).count()
            });
            Ok(SummaryRow {
                task,
                family,
                model_id: spec.id(),
                slug,
                label: spec.label(),
                params,
                runs: runs.len(),
                score_mean: score.mean,
                score_low: score.low,
                score_high: score.high,
                train_seconds_mean: time.mean,
                train_seconds_low: time.low,
                train_seconds_high: time.high,
                circuit_seconds_mean: runs.iter().map(|r| r.circuit_seconds()).sum::<f64>() / runs.len() as f64,
                solved,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSelection {
    pub nn: SummaryRow,
    pub vqc: SummaryRow,
    /// Models of each family meeting the threshold, for manual review.
    pub nn_candidates: Vec<String>,
    pub vqc_candidates: Vec<String>,
}

fn find_row<'a>(rows: &'a [SummaryRow], family: Family, key: &str) -> Result<&'a SummaryRow> {
    let of_family = || rows.iter().filter(move |r| r.family == family);
    if let Some(r) = of_family().find(|r| r.slug == key || r.label == key) {
        return Ok(r);
    }
    let by_id: Vec<&SummaryRow> = of_family().filter(|r| r.model_id == key).collect();
    match by_id.as_slice() {
        [one] => Ok(one),
        [] => Err(Error::Config(format!("no {family} model matches '{key}'"))),
        _ => Err(Error::Config(format!("'{key}' is ambiguous; use the slug"))),
    }
}

/// Per family, the fastest-training model whose mean score reaches
/// `threshold`. `override_pair` (NN key, VQC key; id, slug or label)
/// replaces the automatic choice.
pub fn select_comparable_pair(
    rows: &[SummaryRow],
    threshold: f64,
    override_pair: Option<(&str, &str)>,
) -> Result<PairSelection> {
    let passing = |family: Family| -> Vec<&SummaryRow> {
        rows.iter().filter(|r| r.family == family && r.score_mean >= threshold).collect()
    };
    let nn_pass = passing(Family::Nn);
    let vqc_pass = passing(Family::Vqc);
    let fastest = |c: &[&SummaryRow]| -> Option<SummaryRow> {
        c.iter().min_by(|a, b| a.train_seconds_mean.total_cmp(&b.train_seconds_mean)).map(|r| (*r).clone())
    };
    let (nn, vqc) = match override_pair {
        Some((n, v)) => (find_row(rows, Family::Nn, n)?.clone(), find_row(rows, Family::Vqc, v)?.clone()),
        None => match (fastest(&nn_pass), fastest(&vqc_pass)) {
            (Some(n), Some(v)) => (n, v),
            _ => return Err(Error::NoCandidate(threshold)),
        },
    };
    Ok(PairSelection {
        nn,
        vqc,
        nn_candidates: nn_pass.iter().map(|r| r.label.clone()).collect(),
        vqc_candidates: vqc_pass.iter().map(|r| r.label.clone()).collect(),
    })
}

pub fn parameter_ratio(vqc_params: usize, nn_params: usize) -> f64 {
    vqc_params as f64 / nn_params as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub task: Task,
    pub nn: String,
    pub vqc: String,
    pub nn_params: usize,
    pub vqc_params: usize,
    pub parameter_ratio: f64,
    pub nn_train_seconds: f64,
    pub vqc_train_seconds: f64,
    pub time_ratio: f64,
    /// VQC time with circuits re-priced at hardware speed, relative to the NN.
    pub hw_time_ratio: Option<f64>,
}

impl RatioRow {
    pub fn new(task: Task, nn: &SummaryRow, vqc: &SummaryRow, vqc_hw_seconds: Option<f64>) -> Self {
        Self {
            task,
            nn: nn.model_id.clone(),
            vqc: vqc.model_id.clone(),
            nn_params: nn.params,
            vqc_params: vqc.params,
            parameter_ratio: parameter_ratio(vqc.params, nn.params),
            nn_train_seconds: nn.train_seconds_mean,
            vqc_train_seconds: vqc.train_seconds_mean,
            time_ratio: vqc.train_seconds_mean / nn.train_seconds_mean,
            hw_time_ratio: vqc_hw_seconds.map(|h| h / nn.train_seconds_mean),
        }
    }
}

/// Writes `<task>_summary.csv` per task and, if any pairs are given,
/// `ratios.csv`. Returns the written paths.
pub fn emit_tables(dir: &Path, rows: &[SummaryRow], ratios: &[RatioRow]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut by_task: BTreeMap<Task, Vec<&SummaryRow>> = BTreeMap::new();
    for r in rows {
        by_task.entry(r.task).or_default().push(r);
    }
    for (task, rows) in by_task {
        let path = dir.join(format!("{task}_summary.csv"));
        let mut w = csv::Writer::from_path(&path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    if !ratios.is_empty() {
        let path = dir.join("ratios.csv");
        let mut w = csv::Writer::from_path(&path)?;
        for r in ratios {
            w.serialize(r)?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Writes the logged circuits of every run under `root` as OpenQASM files,
/// one directory per run. Returns (run stem, circuit count).
pub fn export_qasm(root: &Path) -> Result<Vec<(String, usize)>> {
    let layout = RunLayout::new(root);
    let mut out = Vec::new();
    for (stem, circuits) in load_circuit_logs(root)? {
        let rows = write_archive(&layout.qasm_dir().join(&stem), &circuits)?;
        out.push((stem, rows.len()));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMode {
    /// mean(hardware) / mean(simulator).
    #[default]
    RatioOfMeans,
    /// mean over circuits of hardware / simulator.
    MeanOfRatios,
}

impl FromStr for RatioMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio-of-means" | "ratio_of_means" | "means" => Ok(RatioMode::RatioOfMeans),
            "mean-of-ratios" | "mean_of_ratios" | "per-circuit" => Ok(RatioMode::MeanOfRatios),
            other => Err(Error::Config(format!("unknown ratio mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwEstimateRow {
    /// `<task>_<model slug>`.
    pub model: String,
    pub matched_circuits: usize,
    pub mean_simulator_seconds: f64,
    pub mean_hardware_seconds: f64,
    pub ratio_of_means: f64,
    pub mean_of_ratios: f64,
    pub runs: usize,
    pub sim_train_mean: f64,
    pub sim_train_low: f64,
    pub sim_train_high: f64,
    pub hw_train_mean: f64,
    pub hw_train_low: f64,
    pub hw_train_high: f64,
}

/// Joins exported circuit manifests with measured hardware times and
/// re-prices the circuit share of every matching run.
pub fn estimate_hardware(root: &Path, hardware: &[HardwareRow], mode: RatioMode) -> Result<Vec<HwEstimateRow>> {
    let qasm_dir = RunLayout::new(root).qasm_dir();
    let runs = load_runs(root)?;
    let mut manifests: BTreeMap<String, Vec<ManifestRow>> = BTreeMap::new();
    for entry in std::fs::read_dir(&qasm_dir)? {
        let dir = entry?.path();
        if dir.join(MANIFEST_FILE).exists() {
            for row in read_manifest(&dir)? {
                manifests.entry(row.task.clone()).or_default().push(row);
            }
        }
    }
    let mut out = Vec::new();
    for (model, rows) in manifests {
        let timings = join_timings(&rows, hardware);
        let report = match ratio_report(&timings) {
            Ok(r) => r,
            Err(Error::Empty(_)) => {
                info!("{model}: no hardware times for its circuits; skipped");
                continue;
            }
            Err(e) => return Err(e),
        };
        let ratio = match mode {
            RatioMode::RatioOfMeans => report.ratio_of_means,
            RatioMode::MeanOfRatios => report.mean_of_ratios,
        };
        let mut sim = Vec::new();
        let mut hw = Vec::new();
        for r in &runs {
            if format!("{}_{}", r.task()?, r.model().slug()) == model {
                sim.push(r.training_seconds());
                hw.push(estimate_hw_training_time(r.training_seconds(), r.circuit_seconds(), ratio)?);
            }
        }
        if sim.is_empty() {
            warn!("{model}: no run metrics found; skipped");
            continue;
        }
        let s = default_ci(&sim)?;
        let h = default_ci(&hw)?;
        out.push(HwEstimateRow {
            model,
            matched_circuits: report.matched,
            mean_simulator_seconds: report.mean_simulator_seconds,
            mean_hardware_seconds: report.mean_hardware_seconds,
            ratio_of_means: report.ratio_of_means,
            mean_of_ratios: report.mean_of_ratios,
            runs: sim.len(),
            sim_train_mean: s.mean,
            sim_train_low: s.low,
            sim_train_high: s.high,
            hw_train_mean: h.mean,
            hw_train_low: h.low,
            hw_train_high: h.high,
        });
    }
    Ok(out)
}

pub fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_sizes() {
        for (task, nn, vqc) in [(Task::Iris, 12, 12), (Task::Wine, 12, 12), (Task::Wdbc, 6, 6), (Task::FrozenLake, 12, 12)] {
            let g = GridSpec::for_task(task);
            assert_eq!(g.nn_configs().len(), nn);
            assert_eq!(g.vqc_configs().unwrap().len(), vqc);
            assert_eq!(g.configs(None).unwrap().len(), nn + vqc);
            assert_eq!(g.configs(Some(Family::Vqc)).unwrap().len(), vqc);
        }
        let labels: Vec<String> = GridSpec::for_task(Task::Iris).configs(None).unwrap().iter().map(|s| s.label()).collect();
        assert!(labels.contains(&"NN-75 (1x9)".to_string()));
        assert!(labels.contains(&"VQC-28 (Ang, 2)".to_string()));
        let lake: Vec<String> = GridSpec::for_task(Task::FrozenLake).configs(None).unwrap().iter().map(|s| s.id()).collect();
        assert!(lake.contains(&"NN-112".to_string()) && lake.contains(&"VQC-41".to_string()));
    }

    #[test]
    fn bootstrap_basics() {
        let c = bootstrap_ci(&[0.7; 10], 1000, 0.95, 0).unwrap();
        assert_eq!((c.mean, c.low, c.high), (0.7, 0.7, 0.7));
        let v: Vec<f64> = (0..10).map(f64::from).collect();
        let a = bootstrap_ci(&v, 1000, 0.95, 0).unwrap();
        assert_eq!(a, bootstrap_ci(&v, 1000, 0.95, 0).unwrap());
        assert!(a.low <= a.mean && a.mean <= a.high);
        assert_relative_eq!(a.mean, 4.5);
        assert!(bootstrap_ci(&[], 1000, 0.95, 0).is_err());
    }

    #[test]
    fn task_parsing() {
        assert_eq!("rl".parse::<Task>().unwrap(), Task::FrozenLake);
        assert_eq!("Frozen-Lake".parse::<Task>().unwrap(), Task::FrozenLake);
        assert_eq!(Task::Wdbc.to_string().parse::<Task>().unwrap(), Task::Wdbc);
        assert!("mnist".parse::<Task>().is_err());
    }

    fn row(family: Family, id: &str, params: usize, score: f64, secs: f64) -> SummaryRow {
        SummaryRow {
            task: Task::Iris,
            family,
            model_id: id.into(),
            slug: id.to_lowercase(),
            label: id.into(),
            params,
            runs: 10,
            score_mean: score,
            score_low: score,
            score_high: score,
            train_seconds_mean: secs,
            train_seconds_low: secs,
            train_seconds_high: secs,
            circuit_seconds_mean: 0.0,
            solved: None,
        }
    }

    #[test]
    fn pair_selection() {
        let rows = vec![
            row(Family::Nn, "NN-75", 75, 0.968, 1.8),
            row(Family::Nn, "NN-99", 99, 0.97, 2.5),
            row(Family::Nn, "NN-31", 31, 0.90, 1.0),
            row(Family::Vqc, "VQC-28", 28, 0.963, 92.6),
            row(Family::Vqc, "VQC-40", 40, 0.965, 120.0),
        ];
        let p = select_comparable_pair(&rows, 0.96, None).unwrap();
        assert_eq!((p.nn.model_id.as_str(), p.vqc.model_id.as_str()), ("NN-75", "VQC-28"));
        assert_eq!((p.nn_candidates.len(), p.vqc_candidates.len()), (2, 2));
        let o = select_comparable_pair(&rows, 0.96, Some(("NN-99", "VQC-40"))).unwrap();
        assert_eq!((o.nn.params, o.vqc.params), (99, 40));
        assert!(matches!(select_comparable_pair(&rows, 1.01, None), Err(Error::NoCandidate(_))));
        let r = RatioRow::new(Task::Iris, &p.nn, &p.vqc, None);
        assert_relative_eq!(r.parameter_ratio, 28.0 / 75.0);
        assert_relative_eq!(parameter_ratio(41, 41), 1.0);
    }
}
