//! The two interchangeable model families behind one forward/backward API.

mod dense;
mod vqc;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dense::{dense_param_count, relu, DenseCache, DenseNet};
pub use vqc::{CircuitTemplate, Vqc, VqcCache, VqcParameters};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::optim::softmax;
use crate::scalar::Real;
use crate::statevector::EmbeddingKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputMode {
    /// Softmax over the logits (classification).
    Probabilities,
    /// Logits as-is (Q-values).
    Raw,
}

/// Architecture descriptor, independent of parameter values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ModelSpec {
    Nn { sizes: Vec<usize> },
    Vqc { template: CircuitTemplate },
}

impl ModelSpec {
    pub fn nn(input_dim: usize, hidden: &[usize], n_outputs: usize) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(n_outputs);
        ModelSpec::Nn { sizes }
    }

    pub fn vqc(embedding: EmbeddingKind, input_dim: usize, n_layers: usize, n_outputs: usize) -> Result<Self> {
        Ok(ModelSpec::Vqc { template: CircuitTemplate::new(embedding, input_dim, n_layers, n_outputs)? })
    }

    pub fn param_count(&self) -> usize {
        match self {
            ModelSpec::Nn { sizes } => dense_param_count(sizes),
            ModelSpec::Vqc { template } => template.param_count(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        match self {
            ModelSpec::Nn { sizes } => sizes[0],
            ModelSpec::Vqc { template } => template.input_dim,
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            ModelSpec::Nn { sizes } => *sizes.last().unwrap(),
            ModelSpec::Vqc { template } => template.n_outputs,
        }
    }

    pub fn is_vqc(&self) -> bool {
        matches!(self, ModelSpec::Vqc { .. })
    }

    /// Short identifier such as `NN-75` or `VQC-28`.
    pub fn id(&self) -> String {
        match self {
            ModelSpec::Nn { .. } => format!("NN-{}", self.param_count()),
            ModelSpec::Vqc { .. } => format!("VQC-{}", self.param_count()),
        }
    }

    /// File-name friendly descriptor, unique within a grid.
    pub fn slug(&self) -> String {
        match self {
            ModelSpec::Nn { sizes } => {
                let hidden: Vec<String> = sizes[1..sizes.len() - 1].iter().map(|h| h.to_string()).collect();
                format!("nn{}-{}", self.param_count(), hidden.join("x"))
            }
            ModelSpec::Vqc { template } => format!(
                "vqc{}-{}{}",
                self.param_count(),
                template.embedding.short_name().to_lowercase(),
                template.n_layers
            ),
        }
    }

    pub fn label(&self) -> String {
        match self {
            ModelSpec::Nn { sizes } => {
                let hidden = &sizes[1..sizes.len() - 1];
                format!("{} ({}x{})", self.id(), hidden.len(), hidden.first().copied().unwrap_or(0))
            }
            ModelSpec::Vqc { template } => template.label(),
        }
    }

    /// Deterministic fresh parameters for `seed`.
    pub fn init<T: Real>(&self, seed: u64) -> Result<Model<T>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(match self {
            ModelSpec::Nn { sizes } => Model::Nn(DenseNet::init(sizes, &mut rng)?),
            ModelSpec::Vqc { template } => Model::Vqc(Vqc::new(*template, VqcParameters::init(template, &mut rng))?),
        })
    }
}

pub fn param_count(spec: &ModelSpec) -> usize {
    spec.param_count()
}

pub fn init_params<T: Real>(spec: &ModelSpec, seed: u64) -> Result<Model<T>> {
    spec.init(seed)
}

#[derive(Debug, Clone)]
pub enum ForwardCache<T> {
    Nn(DenseCache<T>),
    Vqc(VqcCache<T>),
}

#[derive(Debug, Clone)]
pub struct ModelOutput<T> {
    /// Probabilities or raw logits, depending on the mode.
    pub values: Vec<T>,
    pub logits: Vec<T>,
    pub cache: ForwardCache<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model<T> {
    Nn(DenseNet<T>),
    Vqc(Vqc<T>),
}

impl<T: Real> Model<T> {
    pub fn spec(&self) -> ModelSpec {
        match self {
            Model::Nn(net) => ModelSpec::Nn { sizes: net.sizes().to_vec() },
            Model::Vqc(v) => ModelSpec::Vqc { template: v.template },
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Nn(net) => net.param_count(),
            Model::Vqc(v) => v.template.param_count(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.spec().n_outputs()
    }

    pub fn is_vqc(&self) -> bool {
        matches!(self, Model::Vqc(_))
    }

    pub fn params(&self) -> Vec<T> {
        match self {
            Model::Nn(net) => net.flat(),
            Model::Vqc(v) => v.params.flat(),
        }
    }

    pub fn set_params(&mut self, flat: &[T]) -> Result<()> {
        match self {
            Model::Nn(net) => net.set_flat(flat),
            Model::Vqc(v) => v.params.set_flat(flat),
        }
    }

    pub fn forward(&self, input: &[T], mode: OutputMode) -> Result<ModelOutput<T>> {
        let (logits, cache) = match self {
            Model::Nn(net) => {
                let (l, c) = net.logits(input)?;
                (l, ForwardCache::Nn(c))
            }
            Model::Vqc(v) => {
                let (l, c) = v.logits(input)?;
                (l, ForwardCache::Vqc(c))
            }
        };
        let values = match mode {
            OutputMode::Probabilities => softmax(&logits),
            OutputMode::Raw => logits.clone(),
        };
        Ok(ModelOutput { values, logits, cache })
    }

    /// Forward values only.
    pub fn predict(&self, input: &[T], mode: OutputMode) -> Result<Vec<T>> {
        Ok(self.forward(input, mode)?.values)
    }

    /// Flat parameter gradient of a loss whose gradient with respect to the
    /// logits is `dlogits`.
    pub fn backward(&self, output: ModelOutput<T>, dlogits: &[T]) -> Result<Vec<T>> {
        match (self, output.cache) {
            (Model::Nn(net), ForwardCache::Nn(c)) => net.backward(c, dlogits),
            (Model::Vqc(v), ForwardCache::Vqc(c)) => v.backward(c, dlogits),
            _ => Err(Error::Config("forward cache does not belong to this model".into())),
        }
    }

    /// Concrete circuit evaluated for `input`; `None` for classical models.
    pub fn circuit(&self, input: &[T]) -> Result<Option<Circuit<T>>> {
        match self {
            Model::Nn(_) => Ok(None),
            Model::Vqc(v) => v.template.build_circuit(&v.params, input).map(Some),
        }
    }
}

/// Architecture plus flat parameter list, stored as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: ModelSpec,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn of<T: Real>(model: &Model<T>) -> Self {
        Self { spec: model.spec(), params: model.params().into_iter().map(Real::as_f64).collect() }
    }

    pub fn restore<T: Real>(&self) -> Result<Model<T>> {
        let mut model = self.spec.init::<T>(0)?;
        let flat: Vec<T> = self.params.iter().map(|&p| T::lit(p)).collect();
        model.set_params(&flat)?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
