use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::statevector::{Gate, StateVector};

/// One gate in a circuit. `param` names the trainable angle that was bound
/// into the gate, if any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Op<T> {
    pub gate: Gate<T>,
    pub param: Option<usize>,
}

impl<T> Op<T> {
    pub fn fixed(gate: Gate<T>) -> Self {
        Self { gate, param: None }
    }

    pub fn trainable(gate: Gate<T>, param: usize) -> Self {
        Self { gate, param: Some(param) }
    }
}

/// Ordered gate list over a fixed register, with every angle bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit<T> {
    pub n_qubits: usize,
    pub ops: Vec<Op<T>>,
}

impl<T: Real> Circuit<T> {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new() }
    }

    pub fn push(&mut self, gate: Gate<T>) {
        self.ops.push(Op::fixed(gate));
    }

    pub fn push_param(&mut self, gate: Gate<T>, param: usize) {
        self.ops.push(Op::trainable(gate, param));
    }

    pub fn extend_fixed<I: IntoIterator<Item = Gate<T>>>(&mut self, gates: I) {
        self.ops.extend(gates.into_iter().map(Op::fixed));
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate<T>> {
        self.ops.iter().map(|op| &op.gate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > crate::statevector::MAX_QUBITS {
            return Err(Error::Capacity(self.n_qubits));
        }
        self.ops.iter().try_for_each(|op| op.gate.validate(self.n_qubits))
    }

    /// Largest trainable index referenced plus one.
    pub fn param_span(&self) -> usize {
        self.ops.iter().filter_map(|op| op.param).map(|p| p + 1).max().unwrap_or(0)
    }

    /// Simulates the circuit from `|0...0>`.
    pub fn run(&self) -> Result<StateVector<T>> {
        self.validate()?;
        let mut state = StateVector::zero(self.n_qubits)?;
        for op in &self.ops {
            state.apply_unchecked(&op.gate);
        }
        Ok(state)
    }

    /// `<Z_k>` for each listed qubit after running the circuit.
    pub fn expectations(&self, observables: &[usize]) -> Result<Vec<T>> {
        let state = self.run()?;
        observables.iter().map(|&q| state.expectation_z(q)).collect()
    }
}
