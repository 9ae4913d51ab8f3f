//! Supervised classification: dataset ingestion, the Adam/cross-entropy
//! training loop and validation-based checkpoint selection.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Checkpoint, ModelSpec, OutputMode};
use crate::optim::{adam_step, cross_entropy, AdamConfig, AdamState};
use crate::qasm::CircuitLog;
use crate::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetName {
    Iris,
    Wine,
    Wdbc,
}

impl DatasetName {
    pub const ALL: [DatasetName; 3] = [DatasetName::Iris, DatasetName::Wine, DatasetName::Wdbc];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetName::Iris => "iris",
            DatasetName::Wine => "wine",
            DatasetName::Wdbc => "wdbc",
        }
    }

    /// The CSV shipped with the crate.
    pub fn bundled_csv(self) -> &'static str {
        match self {
            DatasetName::Iris => include_str!("../data/iris.csv"),
            DatasetName::Wine => include_str!("../data/wine.csv"),
            DatasetName::Wdbc => include_str!("../data/wdbc.csv"),
        }
    }
}

impl fmt::Display for DatasetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "iris" => Ok(DatasetName::Iris),
            "wine" => Ok(DatasetName::Wine),
            "wdbc" | "breast_cancer" => Ok(DatasetName::Wdbc),
            other => Err(Error::Config(format!("unknown dataset '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// How the train/validation/test partition depends on the run seed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Each run seed reshuffles the partition.
    #[default]
    PerSeed,
    /// One partition, drawn with the given seed, shared by all runs.
    Fixed(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: DatasetName,
    /// Min-max scaled to `[0, 1]` per column.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn n_features(&self) -> usize {
        self.features[0].len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn indices(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Parses CSV text (header row, numeric feature columns, integer label
    /// last), scales every column to `[0, 1]` over the whole table, then
    /// partitions 75% train and splits the remainder evenly into
    /// validation and test (validation gets the smaller half).
    pub fn from_csv_str(name: DatasetName, text: &str, split_seed: u64, origin: &Path) -> Result<Self> {
        let bad = |msg: String| Error::Dataset { path: origin.to_path_buf(), msg };
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let n_cols = reader.headers()?.len();
        if n_cols < 2 {
            return Err(bad(format!("expected at least 2 columns, found {n_cols}")));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != n_cols {
                return Err(bad(format!("row {} has {} columns, expected {n_cols}", row + 2, record.len())));
            }
            let values = record
                .iter()
                .take(n_cols - 1)
                .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| bad(format!("row {}: non-numeric feature", row + 2)))?;
            let label = record[n_cols - 1]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("row {}: label is not a class index", row + 2)))?;
            features.push(values);
            labels.push(label);
        }
        if features.len() < 4 {
            return Err(bad(format!("only {} rows", features.len())));
        }
        min_max_scale(&mut features);
        let n_classes = labels.iter().max().unwrap() + 1;
        let (train, val, test) = split_indices(features.len(), split_seed);
        Ok(Self { name, features, labels, n_classes, train, val, test })
    }
}

fn min_max_scale(rows: &mut [Vec<f64>]) {
    let d = rows[0].len();
    for c in 0..d {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[c]), hi.max(r[c])));
        let span = hi - lo;
        for r in rows.iter_mut() {
            r[c] = if span > 0.0 { ((r[c] - lo) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
    }
}

/// Seeded shuffle, then `floor(0.75 n)` train, `floor(rest / 2)` validation,
/// the remainder test.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    idx.shuffle(&mut rng);
    let n_train = n * 3 / 4;
    let n_val = (n - n_train) / 2;
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    (idx, val, test)
}

/// Loads the bundled copy of `name`, partitioned with `seed`.
pub fn load_dataset(name: DatasetName, seed: u64) -> Result<Dataset> {
    Dataset::from_csv_str(name, name.bundled_csv(), seed, &PathBuf::from(format!("<bundled {name}.csv>")))
}

/// Loads `name` from a CSV on disk.
pub fn load_dataset_file(name: DatasetName, path: &Path, seed: u64) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Dataset { path: path.to_path_buf(), msg: e.to_string() })?;
    Dataset::from_csv_str(name, &text, seed, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub split: SplitMode,
}

impl Default for SlConfig {
    fn default() -> Self {
        Self { learning_rate: 0.01, epochs: 50, batch_size: 8, split: SplitMode::PerSeed }
    }
}

impl SlConfig {
    pub fn split_seed(&self, run_seed: u64) -> u64 {
        match self.split {
            SplitMode::PerSeed => run_seed,
            SplitMode::Fixed(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Cumulative training wall-clock at the end of this epoch.
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlMetrics {
    pub task: String,
    pub model: ModelSpec,
    pub model_id: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch of the selected checkpoint; 0 when no epoch ran.
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub training_seconds: f64,
    /// Time spent simulating circuits (forward and gradient), VQCs only.
    pub circuit_seconds: f64,
    pub circuit_evals: u64,
}

#[derive(Debug, Clone)]
pub struct SlRun {
    pub metrics: SlMetrics,
    pub best: Checkpoint,
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and mean cross-entropy of `model` on one split.
pub fn evaluate(model: &Model, dataset: &Dataset, split: Split) -> Result<(f64, f64)> {
    let idx = dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::Empty("evaluation split"));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for &i in idx {
        let probs = model.predict(&dataset.features[i], OutputMode::Probabilities)?;
        let (l, _) = cross_entropy(&probs, dataset.labels[i])?;
        loss += l;
        if argmax(&probs) == dataset.labels[i] {
            correct += 1;
        }
    }
    Ok((correct as f64 / idx.len() as f64, loss / idx.len() as f64))
}

/// Trains `spec` from seed-determined initial parameters, keeping the
/// checkpoint with the highest validation accuracy (earliest epoch on ties)
/// and scoring it on the test split.
pub fn train_sl(
    spec: &ModelSpec,
    dataset: &Dataset,
    config: &SlConfig,
    seed: u64,
    mut log: Option<&mut CircuitLog>,
) -> Result<SlRun> {
    if spec.n_outputs() != dataset.n_classes {
        return Err(Error::Dimension { what: "model outputs vs classes", expected: dataset.n_classes, got: spec.n_outputs() });
    }
    if spec.n_inputs() != dataset.n_features() {
        return Err(Error::Dimension { what: "model inputs vs features", expected: dataset.n_features(), got: spec.n_inputs() });
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut model: Model = spec.init(seed)?;
    let adam = AdamConfig::with_lr(config.learning_rate);
    let mut state = AdamState::new(model.param_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);

    let mut order = dataset.train.clone();
    let mut params = model.params();
    let mut best_params = params.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut circuit_seconds = 0.0;
    let mut circuit_evals = 0u64;
    let is_vqc = model.is_vqc();
    let start = Instant::now();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let mut grad = vec![0.0; params.len()];
            for &i in batch {
                let x = &dataset.features[i];
                if let Some(log) = log.as_deref_mut() {
                    log.record(epoch, &model, x)?;
                }
                let t0 = Instant::now();
                let out = model.forward(x, OutputMode::Probabilities)?;
                let (loss, dlogits) = cross_entropy(&out.values, dataset.labels[i])?;
                if argmax(&out.values) == dataset.labels[i] {
                    correct += 1;
                }
                let g = model.backward(out, &dlogits)?;
                if is_vqc {
                    circuit_seconds += t0.elapsed().as_secs_f64();
                    circuit_evals += 1;
                }
                loss_sum += loss;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|v| *v *= scale);
            adam_step(&mut params, &grad, &mut state, &adam)?;
            model.set_params(&params)?;
        }
        let (val_accuracy, val_loss) = evaluate(&model, dataset, Split::Validation)?;
        if val_accuracy > best_val {
            best_val = val_accuracy;
            best_epoch = epoch;
            best_params.clone_from(&params);
        }
        let n = order.len() as f64;
        epochs.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            val_loss,
            val_accuracy,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
    }
    let training_seconds = start.elapsed().as_secs_f64();
    model.set_params(&best_params)?;
    let (test_accuracy, test_loss) = evaluate(&model, dataset, Split::Test)?;
    let metrics = SlMetrics {
        task: dataset.name.to_string(),
        model: spec.clone(),
        model_id: spec.id(),
        seed,
        epochs,
        best_epoch,
        test_accuracy,
        test_loss,
        training_seconds,
        circuit_seconds,
        circuit_evals,
    };
    Ok(SlRun { metrics, best: Checkpoint::of(&model) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::EmbeddingKind;

    #[test]
    fn bundled_shapes_and_splits() {
        for (name, n, d, k, sizes) in [
            (DatasetName::Iris, 150, 4, 3, (112, 19, 19)),
            (DatasetName::Wine, 178, 13, 3, (133, 22, 23)),
            (DatasetName::Wdbc, 569, 30, 2, (426, 71, 72)),
        ] {
            let ds = load_dataset(name, 0).unwrap();
            assert_eq!((ds.len(), ds.n_features(), ds.n_classes), (n, d, k));
            assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), sizes);
            let mut all: Vec<usize> = ds.train.iter().chain(&ds.val).chain(&ds.test).copied().collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>());
            for c in 0..d {
                let col: Vec<f64> = ds.features.iter().map(|r| r[c]).collect();
                assert_eq!(col.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
                assert_eq!(col.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
        }
        assert_eq!(EmbeddingKind::Amplitude.qubits_for(30), 5);
    }

    #[test]
    fn splits_depend_on_seed_only() {
        let a = load_dataset(DatasetName::Iris, 3).unwrap();
        let b = load_dataset(DatasetName::Iris, 3).unwrap();
        let c = load_dataset(DatasetName::Iris, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn malformed_csv_is_rejected() {
        let p = Path::new("x.csv");
        assert!(Dataset::from_csv_str(DatasetName::Iris, "a,b,label\n1,2,0\n1,2\n", 0, p).is_err());
        assert!(Dataset::from_csv_str(DatasetName::Iris, "a,b,label\n1,x,0\n1,2,0\n1,2,1\n3,3,1\n", 0, p).is_err());
        assert!(Dataset::from_csv_str(DatasetName::Iris, "a,b,label\n1,2,0.5\n1,2,0\n1,2,1\n3,3,1\n", 0, p).is_err());
        assert!(load_dataset_file(DatasetName::Iris, Path::new("/nonexistent/iris.csv"), 0).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn zero_epochs_returns_untrained_model() {
        let ds = load_dataset(DatasetName::Iris, 0).unwrap();
        let spec = ModelSpec::nn(4, &[9], 3);
        let cfg = SlConfig { epochs: 0, ..SlConfig::default() };
        let run = train_sl(&spec, &ds, &cfg, 0, None).unwrap();
        assert!(run.metrics.epochs.is_empty());
        assert_eq!(run.metrics.best_epoch, 0);
        assert!((0.0..=1.0).contains(&run.metrics.test_accuracy));
        let init: Model = spec.init(0).unwrap();
        assert_eq!(run.best.restore::<f64>().unwrap(), init);
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let ds = load_dataset(DatasetName::Iris, 0).unwrap();
        assert!(train_sl(&ModelSpec::nn(4, &[9], 2), &ds, &SlConfig::default(), 0, None).is_err());
        assert!(train_sl(&ModelSpec::nn(5, &[9], 3), &ds, &SlConfig::default(), 0, None).is_err());
    }
}
