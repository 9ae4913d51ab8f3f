use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::gradient::{adjoint_vjp, remap_angle};
use crate::scalar::Real;
use crate::statevector::{angle_embedding_gates, ceil_log2, mottonen_gates, EmbeddingKind, Gate, StateVector, MAX_QUBITS};

/// Architecture of a data re-uploading variational classifier.
///
/// Each layer applies the embedding, then `RZ RY RZ` on every qubit, then a
/// CNOT ring. The first `n_outputs` qubits are measured in the Z basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitTemplate {
    pub embedding: EmbeddingKind,
    pub input_dim: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_outputs: usize,
    pub reupload: bool,
}

impl CircuitTemplate {
    /// Angle embedding uses one qubit per feature. Amplitude embedding uses
    /// `ceil(log2(input_dim))` qubits, widened to `n_outputs` when more
    /// outputs than that are measured.
    pub fn new(embedding: EmbeddingKind, input_dim: usize, n_layers: usize, n_outputs: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be positive".into()));
        }
        if n_outputs == 0 {
            return Err(Error::Config("at least one output required".into()));
        }
        let n_qubits = match embedding {
            EmbeddingKind::Angle => input_dim,
            EmbeddingKind::Amplitude => ceil_log2(input_dim).max(n_outputs).max(1),
        };
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(n_qubits));
        }
        if n_outputs > n_qubits {
            return Err(Error::Config(format!(
                "{n_outputs} outputs cannot be read from {n_qubits} qubits"
            )));
        }
        Ok(Self { embedding, input_dim, n_qubits, n_layers, n_outputs, reupload: true })
    }

    pub fn theta_len(&self) -> usize {
        3 * self.n_qubits * self.n_layers
    }

    pub fn param_count(&self) -> usize {
        self.theta_len() + self.n_outputs + 1
    }

    pub fn measured_qubits(&self) -> Vec<usize> {
        (0..self.n_outputs).collect()
    }

    /// Index of `theta[layer][qubit][slot]` in the flat parameter vector.
    #[inline]
    pub fn theta_index(&self, layer: usize, qubit: usize, slot: usize) -> usize {
        (layer * self.n_qubits + qubit) * 3 + slot
    }

    /// Constant gates encoding `input`.
    pub fn embedding_gates<T: Real>(&self, input: &[T]) -> Result<Vec<Gate<T>>> {
        if input.len() != self.input_dim {
            return Err(Error::Dimension { what: "VQC input", expected: self.input_dim, got: input.len() });
        }
        match self.embedding {
            EmbeddingKind::Angle => angle_embedding_gates(input, self.n_qubits),
            EmbeddingKind::Amplitude => {
                if let Some(&bad) = input.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                    return Err(Error::Domain { value: bad.as_f64(), expected: "[0, 1]" });
                }
                // An all-zero input has no direction; it embeds as |0...0>,
                // whose preparation circuit is the identity.
                if input.iter().all(|v| *v == T::zero()) {
                    return Ok(Vec::new());
                }
                mottonen_gates(input, self.n_qubits)
            }
        }
    }

    /// Entangling ring: `i -> i+1` plus the wrap-around `n-1 -> 0` for `n > 2`.
    pub fn entangler<T: Real>(&self) -> Vec<Gate<T>> {
        let n = self.n_qubits;
        match n {
            1 => Vec::new(),
            2 => vec![Gate::cnot(0, 1)],
            _ => (0..n).map(|i| Gate::cnot(i, (i + 1) % n)).collect(),
        }
    }

    /// Binds remapped angles and `input` into a concrete circuit. Trainable
    /// gates carry their flat `theta` index.
    pub fn build_circuit<T: Real>(&self, params: &VqcParameters<T>, input: &[T]) -> Result<Circuit<T>> {
        if params.theta.len() != self.theta_len() {
            return Err(Error::Dimension { what: "theta", expected: self.theta_len(), got: params.theta.len() });
        }
        let embed = self.embedding_gates(input)?;
        let ring = self.entangler::<T>();
        let mut circuit = Circuit::new(self.n_qubits);
        for layer in 0..self.n_layers {
            if layer == 0 || self.reupload {
                circuit.extend_fixed(embed.iter().copied());
            }
            for q in 0..self.n_qubits {
                let idx = self.theta_index(layer, q, 0);
                let angle = |slot: usize| remap_angle(params.theta[idx + slot]).0;
                circuit.push_param(Gate::rz(q, angle(0)), idx);
                circuit.push_param(Gate::ry(q, angle(1)), idx + 1);
                circuit.push_param(Gate::rz(q, angle(2)), idx + 2);
            }
            circuit.extend_fixed(ring.iter().copied());
        }
        Ok(circuit)
    }

    pub fn label(&self) -> String {
        format!("VQC-{} ({}, {})", self.param_count(), self.embedding.short_name(), self.n_layers)
    }
}

/// Trainable state of a VQC: raw rotation parameters (pre-remap), output
/// biases and the shared output scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqcParameters<T> {
    pub theta: Vec<T>,
    pub biases: Vec<T>,
    pub scale: T,
}

impl<T: Real> VqcParameters<T> {
    pub fn zeros(template: &CircuitTemplate) -> Self {
        Self { theta: vec![T::zero(); template.theta_len()], biases: vec![T::zero(); template.n_outputs], scale: T::one() }
    }

    /// Fresh parameters: theta in `[-1, 1]`, biases in `[-0.001, 0.001]`, scale 1.
    pub fn init<R: Rng>(template: &CircuitTemplate, rng: &mut R) -> Self {
        let theta = (0..template.theta_len()).map(|_| T::lit(rng.gen_range(-1.0..=1.0))).collect();
        let biases = (0..template.n_outputs).map(|_| T::lit(rng.gen_range(-0.001..=0.001))).collect();
        Self { theta, biases, scale: T::one() }
    }

    pub fn flat(&self) -> Vec<T> {
        let mut out = self.theta.clone();
        out.extend_from_slice(&self.biases);
        out.push(self.scale);
        out
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        let want = self.theta.len() + self.biases.len() + 1;
        if flat.len() != want {
            return Err(Error::Dimension { what: "VQC flat parameters", expected: want, got: flat.len() });
        }
        let (theta, rest) = flat.split_at(self.theta.len());
        let (biases, scale) = rest.split_at(self.biases.len());
        self.theta.copy_from_slice(theta);
        self.biases.copy_from_slice(biases);
        self.scale = scale[0];
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vqc<T> {
    pub template: CircuitTemplate,
    pub params: VqcParameters<T>,
}

/// Values retained from a VQC forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct VqcCache<T> {
    pub circuit: Circuit<T>,
    pub state: StateVector<T>,
    pub expectations: Vec<T>,
}

impl<T: Real> Vqc<T> {
    pub fn new(template: CircuitTemplate, params: VqcParameters<T>) -> Result<Self> {
        if params.theta.len() != template.theta_len() || params.biases.len() != template.n_outputs {
            return Err(Error::Dimension {
                what: "VQC parameters",
                expected: template.param_count(),
                got: params.theta.len() + params.biases.len() + 1,
            });
        }
        Ok(Self { template, params })
    }

    /// Logits `scale * <Z_k> + bias_k` and the cache needed for gradients.
    pub fn logits(&self, input: &[T]) -> Result<(Vec<T>, VqcCache<T>)> {
        let circuit = self.template.build_circuit(&self.params, input)?;
        let state = circuit.run()?;
        let expectations: Vec<T> = (0..self.template.n_outputs).map(|k| state.expectation_z_unchecked(k)).collect();
        let logits = expectations
            .iter()
            .zip(&self.params.biases)
            .map(|(&e, &b)| self.params.scale * e + b)
            .collect();
        Ok((logits, VqcCache { circuit, state, expectations }))
    }

    /// Gradient of a scalar loss with respect to the flat parameter vector,
    /// given the loss gradient with respect to the logits.
    pub fn backward(&self, cache: VqcCache<T>, dlogits: &[T]) -> Result<Vec<T>> {
        let k = self.template.n_outputs;
        if dlogits.len() != k {
            return Err(Error::Dimension { what: "logit gradient", expected: k, got: dlogits.len() });
        }
        let weights: Vec<T> = dlogits.iter().map(|&d| d * self.params.scale).collect();
        let dscale: T = dlogits.iter().zip(&cache.expectations).map(|(&d, &e)| d * e).sum();
        let dphi = adjoint_vjp(&cache.circuit, cache.state, &weights, self.template.theta_len())?;
        let mut grads: Vec<T> = dphi
            .into_iter()
            .zip(&self.params.theta)
            .map(|(g, &z)| g * remap_angle(z).1)
            .collect();
        grads.extend_from_slice(dlogits);
        grads.push(dscale);
        Ok(grads)
    }
}
