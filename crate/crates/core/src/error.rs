use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("register of {0} qubits is outside the supported range 1..=20")]
    Capacity(usize),
    #[error("qubit index {index} out of range for {n_qubits}-qubit register")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("CNOT control and target must differ (both {0})")]
    ControlEqualsTarget(usize),
    #[error("value {value} outside the domain {expected}")]
    Domain { value: f64, expected: &'static str },
    #[error("cannot normalize an all-zero vector")]
    Normalization,
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no model meets the threshold {0}")]
    NoCandidate(f64),
    #[error("episode already finished; reset the environment before stepping")]
    EpisodeDone,
    #[error("dataset {path}: {msg}")]
    Dataset { path: PathBuf, msg: String },
    #[error("OpenQASM parse error at line {line}: {msg}")]
    Qasm { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
