//! Circuit logging, OpenQASM 2 serialization, depth accounting and the
//! simulator-to-hardware time extrapolation.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Model;
use crate::statevector::{Axis, Gate, StateVector};

pub const DEFAULT_SHOTS: u32 = 1024;

/// A fully bound circuit as it was executed during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteCircuit {
    pub id: String,
    pub n_qubits: usize,
    pub gates: Vec<Gate<f64>>,
    pub measured: Vec<usize>,
    pub task: String,
    /// 1-based epoch or episode the circuit was captured in.
    pub epoch: usize,
    pub shots: u32,
    /// Wall-clock of one simulator execution of this circuit.
    pub sim_seconds: f64,
}

impl ConcreteCircuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate<f64>>, measured: Vec<usize>) -> Self {
        Self { id: String::new(), n_qubits, gates, measured, task: String::new(), epoch: 0, shots: DEFAULT_SHOTS, sim_seconds: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.gates {
            g.validate(self.n_qubits)?;
        }
        for &q in &self.measured {
            if q >= self.n_qubits {
                return Err(Error::QubitIndex { index: q, n_qubits: self.n_qubits });
            }
        }
        Ok(())
    }

    pub fn simulate(&self) -> Result<StateVector<f64>> {
        let mut state = StateVector::zero(self.n_qubits)?;
        state.apply_all(&self.gates)?;
        Ok(state)
    }

    /// Joint outcome distribution of the measured qubits, indexed with the
    /// first measured qubit as the most significant bit.
    pub fn measured_distribution(&self) -> Result<Vec<f64>> {
        let state = self.simulate()?;
        let n = self.n_qubits;
        let mut out = vec![0.0; 1 << self.measured.len()];
        for (i, p) in state.probabilities().into_iter().enumerate() {
            let key = self
                .measured
                .iter()
                .fold(0usize, |acc, &q| (acc << 1) | ((i >> (n - 1 - q)) & 1));
            out[key] += p;
        }
        Ok(out)
    }
}

/// Epochs (1-based) at which circuits are captured: `count` evenly spaced
/// points starting at 1 with step `(total - 1) / (count - 1)`.
pub fn sample_points(total: usize, count: usize) -> Vec<usize> {
    if total == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![1];
    }
    let step = ((total - 1) / (count - 1)).max(1);
    let mut points: Vec<usize> = (0..count).map(|i| 1 + i * step).filter(|&e| e <= total).collect();
    points.dedup();
    points
}

/// Collects the distinct circuits a VQC evaluates at the sampled epochs.
#[derive(Debug, Clone)]
pub struct CircuitLog {
    task: String,
    points: Vec<usize>,
    shots: u32,
    limit: Option<usize>,
    per_point: HashMap<usize, usize>,
    seen: HashSet<u64>,
    circuits: Vec<ConcreteCircuit>,
}

impl CircuitLog {
    pub fn new(task: impl Into<String>, total_epochs: usize, samples: usize) -> Self {
        Self {
            task: task.into(),
            points: sample_points(total_epochs, samples),
            shots: DEFAULT_SHOTS,
            limit: None,
            per_point: HashMap::new(),
            seen: HashSet::new(),
            circuits: Vec::new(),
        }
    }

    /// Keeps at most `n` distinct circuits per sampled epoch.
    pub fn with_limit(mut self, n: usize) -> Self {
        self.limit = Some(n);
        self
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn wants(&self, epoch: usize) -> bool {
        let full = self.limit.is_some_and(|n| self.per_point.get(&epoch).copied().unwrap_or(0) >= n);
        !full && self.points.binary_search(&epoch).is_ok()
    }

    /// Captures the circuit `model` runs on `input` if `epoch` is sampled
    /// and the (input, parameters) pair is new. Classical models are ignored.
    pub fn record(&mut self, epoch: usize, model: &Model, input: &[f64]) -> Result<()> {
        if !self.wants(epoch) {
            return Ok(());
        }
        let Some(circuit) = model.circuit(input)? else {
            return Ok(());
        };
        let mut h = DefaultHasher::new();
        epoch.hash(&mut h);
        input.iter().for_each(|v| v.to_bits().hash(&mut h));
        model.params().iter().for_each(|v| v.to_bits().hash(&mut h));
        if !self.seen.insert(h.finish()) {
            return Ok(());
        }
        let measured: Vec<usize> = (0..model.n_outputs()).collect();
        let t0 = Instant::now();
        let state = circuit.run()?;
        for &q in &measured {
            std::hint::black_box(state.expectation_z(q)?);
        }
        let sim_seconds = t0.elapsed().as_secs_f64();
        *self.per_point.entry(epoch).or_default() += 1;
        let id = format!("{}-e{:04}-{:05}", self.task, epoch, self.circuits.len());
        self.circuits.push(ConcreteCircuit {
            id,
            n_qubits: circuit.n_qubits,
            gates: circuit.gates().copied().collect(),
            measured,
            task: self.task.clone(),
            epoch,
            shots: self.shots,
            sim_seconds,
        });
        Ok(())
    }

    pub fn circuits(&self) -> &[ConcreteCircuit] {
        &self.circuits
    }

    pub fn into_circuits(self) -> Vec<ConcreteCircuit> {
        self.circuits
    }
}

fn fmt_angle(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes to OpenQASM 2.0 using `qelib1.inc` gates only.
pub fn emit_qasm2(circuit: &ConcreteCircuit) -> Result<String> {
    circuit.validate()?;
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    writeln!(out, "qreg q[{}];", circuit.n_qubits).unwrap();
    if !circuit.measured.is_empty() {
        writeln!(out, "creg c[{}];", circuit.measured.len()).unwrap();
    }
    for g in &circuit.gates {
        match *g {
            Gate::Rot { axis, target, angle } => {
                let name = match axis {
                    Axis::X => "rx",
                    Axis::Y => "ry",
                    Axis::Z => "rz",
                };
                writeln!(out, "{name}({}) q[{target}];", fmt_angle(angle)).unwrap();
            }
            Gate::Cnot { control, target } => writeln!(out, "cx q[{control}],q[{target}];").unwrap(),
        }
    }
    for (bit, q) in circuit.measured.iter().enumerate() {
        writeln!(out, "measure q[{q}] -> c[{bit}];").unwrap();
    }
    Ok(out)
}

/// Greedy layering: each gate lands one layer after the deepest gate on any
/// of its qubits. Measurement adds one final layer.
pub fn circuit_depth(circuit: &ConcreteCircuit) -> usize {
    let mut level = vec![0usize; circuit.n_qubits];
    for g in &circuit.gates {
        match g.qubits() {
            (t, None) => level[t] += 1,
            (t, Some(c)) => {
                let l = level[t].max(level[c]) + 1;
                level[t] = l;
                level[c] = l;
            }
        }
    }
    let body = level.into_iter().max().unwrap_or(0);
    body + usize::from(!circuit.measured.is_empty())
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Str(String),
    Sym(char),
    Arrow,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let mut toks = Vec::new();
    for (ln, raw) in src.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split("//").next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            if ch.is_whitespace() {
                i += 1;
            } else if ch.is_ascii_alphabetic() || ch == '_' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[s..i].iter().collect()), line_no));
            } else if ch.is_ascii_digit() || ch == '.' {
                let s = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let text: String = chars[s..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Qasm { line: line_no, msg: format!("bad number '{text}'") })?;
                toks.push((Tok::Num(v), line_no));
            } else if ch == '"' {
                let s = i + 1;
                i = s;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i >= chars.len() {
                    return Err(Error::Qasm { line: line_no, msg: "unterminated string".into() });
                }
                toks.push((Tok::Str(chars[s..i].iter().collect()), line_no));
                i += 1;
            } else if ch == '-' && chars.get(i + 1) == Some(&'>') {
                toks.push((Tok::Arrow, line_no));
                i += 2;
            } else if "[](),;+-*/^".contains(ch) {
                toks.push((Tok::Sym(ch), line_no));
                i += 1;
            } else {
                return Err(Error::Qasm { line: line_no, msg: format!("unexpected character '{ch}'") });
            }
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map(|t| t.1).unwrap_or(0)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Qasm { line: self.line(), msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        match self.next() {
            Some(Tok::Sym(s)) if s == c => Ok(()),
            other => self.err(format!("expected '{c}', found {other:?}")),
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn uint(&mut self) -> Result<usize> {
        match self.next() {
            Some(Tok::Num(v)) if v >= 0.0 && v.fract() == 0.0 => Ok(v as usize),
            other => self.err(format!("expected non-negative integer, found {other:?}")),
        }
    }

    fn indexed(&mut self) -> Result<(String, usize)> {
        let name = self.ident()?;
        self.expect_sym('[')?;
        let i = self.uint()?;
        self.expect_sym(']')?;
        Ok((name, i))
    }

    // expr := term (('+'|'-') term)* ; term := factor (('*'|'/') factor)*
    // factor := '-' factor | primary ('^' factor)? ; primary := num | pi | '(' expr ')'
    fn expr(&mut self) -> Result<f64> {
        let mut v = self.term()?;
        while let Some(Tok::Sym(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.term()?;
            v = if c == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn term(&mut self) -> Result<f64> {
        let mut v = self.factor()?;
        while let Some(Tok::Sym(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let r = self.factor()?;
            v = if c == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn factor(&mut self) -> Result<f64> {
        if let Some(Tok::Sym('-')) = self.peek() {
            self.pos += 1;
            return Ok(-self.factor()?);
        }
        let base = match self.next() {
            Some(Tok::Num(v)) => v,
            Some(Tok::Ident(s)) if s == "pi" => std::f64::consts::PI,
            Some(Tok::Sym('(')) => {
                let v = self.expr()?;
                self.expect_sym(')')?;
                v
            }
            other => return self.err(format!("expected expression, found {other:?}")),
        };
        if let Some(Tok::Sym('^')) = self.peek() {
            self.pos += 1;
            return Ok(base.powf(self.factor()?));
        }
        Ok(base)
    }
}

/// Parses the OpenQASM 2 subset this crate emits: one quantum register,
/// at most one classical register, `rx/ry/rz/cx`, `measure` and `barrier`.
pub fn parse_qasm2(src: &str) -> Result<ConcreteCircuit> {
    let mut p = Parser { toks: tokenize(src)?, pos: 0 };
    match (p.next(), p.next(), p.next()) {
        (Some(Tok::Ident(h)), Some(Tok::Num(v)), Some(Tok::Sym(';'))) if h == "OPENQASM" && v == 2.0 => {}
        _ => return Err(Error::Qasm { line: 1, msg: "missing 'OPENQASM 2.0;' header".into() }),
    }
    let mut qreg: Option<(String, usize)> = None;
    let mut cregs: HashMap<String, usize> = HashMap::new();
    let mut gates = Vec::new();
    let mut measured: Vec<(usize, usize)> = Vec::new();
    let qubit = |p: &mut Parser, qreg: &Option<(String, usize)>| -> Result<usize> {
        let (name, i) = p.indexed()?;
        match qreg {
            Some((q, n)) if *q == name && i < *n => Ok(i),
            Some((q, _)) if *q == name => p.err(format!("qubit index {i} out of range")),
            _ => p.err(format!("unknown quantum register '{name}'")),
        }
    };
    while let Some(tok) = p.next() {
        let Tok::Ident(word) = tok else {
            return p.err(format!("expected statement, found {tok:?}"));
        };
        match word.as_str() {
            "include" => {
                match p.next() {
                    Some(Tok::Str(_)) => {}
                    other => return p.err(format!("expected file name, found {other:?}")),
                }
                p.expect_sym(';')?;
            }
            "qreg" => {
                let (name, n) = p.indexed()?;
                p.expect_sym(';')?;
                if qreg.is_some() {
                    return p.err("only one quantum register is supported");
                }
                qreg = Some((name, n));
            }
            "creg" => {
                let (name, n) = p.indexed()?;
                p.expect_sym(';')?;
                cregs.insert(name, n);
            }
            "rx" | "ry" | "rz" => {
                p.expect_sym('(')?;
                let angle = p.expr()?;
                p.expect_sym(')')?;
                let t = qubit(&mut p, &qreg)?;
                p.expect_sym(';')?;
                let axis = match word.as_str() {
                    "rx" => Axis::X,
                    "ry" => Axis::Y,
                    _ => Axis::Z,
                };
                gates.push(Gate::Rot { axis, target: t, angle });
            }
            "cx" | "CX" => {
                let c = qubit(&mut p, &qreg)?;
                p.expect_sym(',')?;
                let t = qubit(&mut p, &qreg)?;
                p.expect_sym(';')?;
                if c == t {
                    return p.err("cx control equals target");
                }
                gates.push(Gate::cnot(c, t));
            }
            "measure" => {
                let q = qubit(&mut p, &qreg)?;
                match p.next() {
                    Some(Tok::Arrow) => {}
                    other => return p.err(format!("expected '->', found {other:?}")),
                }
                let (cname, bit) = p.indexed()?;
                p.expect_sym(';')?;
                match cregs.get(&cname) {
                    Some(&n) if bit < n => measured.push((bit, q)),
                    _ => return p.err(format!("bad classical target {cname}[{bit}]")),
                }
            }
            "barrier" => {
                while !matches!(p.next(), Some(Tok::Sym(';')) | None) {}
            }
            other => return p.err(format!("unsupported statement '{other}'")),
        }
    }
    let Some((_, n_qubits)) = qreg else {
        return Err(Error::Qasm { line: p.line(), msg: "no quantum register declared".into() });
    };
    measured.sort_unstable();
    Ok(ConcreteCircuit::new(n_qubits, gates, measured.into_iter().map(|(_, q)| q).collect()))
}

// ---------------------------------------------------------------------------
// Timing and extrapolation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub circuit_id: String,
    pub simulator_seconds: f64,
    pub hardware_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    /// mean(hardware) / mean(simulator) over matched circuits.
    pub ratio_of_means: f64,
    /// mean over circuits of hardware / simulator.
    pub mean_of_ratios: f64,
    pub matched: usize,
    pub mean_simulator_seconds: f64,
    pub mean_hardware_seconds: f64,
}

fn matched_pairs(records: &[TimingRecord]) -> Result<Vec<(f64, f64)>> {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.hardware_seconds.map(|h| (r.simulator_seconds, h)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Empty("matched simulator/hardware timings"));
    }
    if let Some(&(s, h)) = pairs.iter().find(|(s, h)| !(*s > 0.0 && *h > 0.0)) {
        return Err(Error::Domain { value: if s > 0.0 { h } else { s }, expected: "positive execution time" });
    }
    Ok(pairs)
}

/// Hardware-to-simulator time ratio, `mean(hw) / mean(sim)`.
pub fn compute_ratio(records: &[TimingRecord]) -> Result<f64> {
    Ok(ratio_report(records)?.ratio_of_means)
}

pub fn ratio_report(records: &[TimingRecord]) -> Result<RatioReport> {
    let pairs = matched_pairs(records)?;
    let n = pairs.len() as f64;
    let mean_sim = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_hw = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_of_ratios = pairs.iter().map(|(s, h)| h / s).sum::<f64>() / n;
    Ok(RatioReport {
        ratio_of_means: mean_hw / mean_sim,
        mean_of_ratios,
        matched: pairs.len(),
        mean_simulator_seconds: mean_sim,
        mean_hardware_seconds: mean_hw,
    })
}

/// Replaces the circuit share of a simulator training run by its hardware
/// estimate: `(total - circuit) + ratio * circuit`.
pub fn estimate_hw_training_time(total_train_s: f64, circuit_sim_s: f64, ratio: f64) -> Result<f64> {
    if !(circuit_sim_s >= 0.0 && circuit_sim_s <= total_train_s) {
        return Err(Error::Precondition(format!(
            "circuit time {circuit_sim_s} must lie in [0, total training time {total_train_s}]"
        )));
    }
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Domain { value: ratio, expected: "positive finite ratio" });
    }
    Ok((total_train_s - circuit_sim_s) + ratio * circuit_sim_s)
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub circuit_id: String,
    pub task: String,
    pub epoch: usize,
    pub n_qubits: usize,
    pub gates: usize,
    pub depth: usize,
    pub shots: u32,
    pub sim_seconds: f64,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes one `.qasm` file per circuit plus `manifest.csv` into `dir`.
pub fn write_archive(dir: &Path, circuits: &[ConcreteCircuit]) -> Result<Vec<ManifestRow>> {
    std::fs::create_dir_all(dir)?;
    let mut rows = Vec::with_capacity(circuits.len());
    let mut w = csv::Writer::from_path(dir.join(MANIFEST_FILE))?;
    for c in circuits {
        std::fs::write(dir.join(format!("{}.qasm", c.id)), emit_qasm2(c)?)?;
        let row = ManifestRow {
            circuit_id: c.id.clone(),
            task: c.task.clone(),
            epoch: c.epoch,
            n_qubits: c.n_qubits,
            gates: c.gates.len(),
            depth: circuit_depth(c),
            shots: c.shots,
            sim_seconds: c.sim_seconds,
        };
        w.serialize(&row)?;
        rows.push(row);
    }
    w.flush()?;
    Ok(rows)
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ManifestRow>> {
    let mut r = csv::Reader::from_path(dir.join(MANIFEST_FILE))?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HardwareRow {
    pub circuit_id: String,
    pub hardware_seconds: f64,
}

/// Reads a `circuit_id,hardware_seconds` CSV.
pub fn read_hardware_times(path: &Path) -> Result<Vec<HardwareRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Joins manifest simulator times with externally measured hardware times.
pub fn join_timings(manifest: &[ManifestRow], hardware: &[HardwareRow]) -> Vec<TimingRecord> {
    let hw: HashMap<&str, f64> = hardware.iter().map(|h| (h.circuit_id.as_str(), h.hardware_seconds)).collect();
    manifest
        .iter()
        .map(|m| TimingRecord {
            circuit_id: m.circuit_id.clone(),
            simulator_seconds: m.sim_seconds,
            hardware_seconds: hw.get(m.circuit_id.as_str()).copied(),
        })
        .collect()
}

/// Published per-circuit means for the four selected VQCs, usable as a
/// sample hardware input.
pub const REFERENCE_HARDWARE_CSV: &str = include_str!("../data/reference_hardware_times.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceHardwareRow {
    pub task: String,
    pub model: String,
    pub qubits: usize,
    pub depth: usize,
    pub simulator_seconds: f64,
    pub hardware_seconds: f64,
    pub ratio: f64,
}

pub fn reference_hardware_rows() -> Result<Vec<ReferenceHardwareRow>> {
    let mut r = csv::Reader::from_reader(REFERENCE_HARDWARE_CSV.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
