//! Dense neural networks and statevector-simulated variational quantum
//! circuits, trained side by side on classification and Q-learning tasks.
//!
//! The numeric core ([`statevector`], [`circuit`], [`gradient`], [`models`],
//! [`optim`]) is generic over [`Real`]; the experiment layers ([`training`],
//! [`rl`], [`harness`], [`qasm`]) run in `f64`.

pub mod circuit;
pub mod error;
pub mod gradient;
pub mod harness;
pub mod models;
pub mod optim;
pub mod qasm;
pub mod rl;
pub mod scalar;
pub mod statevector;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StateVector = statevector::StateVector<f64>;
pub type Gate = statevector::Gate<f64>;
pub type Circuit = circuit::Circuit<f64>;
pub type Model = models::Model<f64>;
pub type VqcParameters = models::VqcParameters<f64>;
pub type DenseNet = models::DenseNet<f64>;

pub type StateVector32 = statevector::StateVector<f32>;
pub type Model32 = models::Model<f32>;
