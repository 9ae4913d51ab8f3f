//! Analytic gradients of Pauli-Z expectations with respect to circuit angles.
//!
//! The adjoint method is the production path: one forward simulation, then a
//! reverse sweep that un-applies each gate from both the state and the
//! observable-weighted co-state. The parameter-shift rule evaluates the
//! circuit twice per angle and serves as an independent check.

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::models::{CircuitTemplate, VqcParameters};
use crate::scalar::Real;
use crate::statevector::{Gate, StateVector};

/// Dense `observables x params` matrix of partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Jacobian<T> {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn row_mut(&mut self, row: usize) -> &mut [T] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `d<Z_k>/d phi` for a variational circuit, laid out as
/// `(k, layer, qubit, rotation slot)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientRecord<T> {
    pub n_outputs: usize,
    pub n_layers: usize,
    pub n_qubits: usize,
    pub jacobian: Jacobian<T>,
}

impl<T: Real> GradientRecord<T> {
    pub fn at(&self, output: usize, layer: usize, qubit: usize, slot: usize) -> T {
        self.jacobian.get(output, (layer * self.n_qubits + qubit) * 3 + slot)
    }
}

/// `phi = pi * tanh(z)` and `d phi / dz = pi * (1 - tanh(z)^2)`.
#[inline]
pub fn remap_angle<T: Real>(raw: T) -> (T, T) {
    let t = raw.tanh();
    (T::PI() * t, T::PI() * (T::one() - t * t))
}

/// Elementwise [`remap_angle`], returning angles and their derivatives.
pub fn remap_angles<T: Real>(raw: &[T]) -> (Vec<T>, Vec<T>) {
    raw.iter().map(|&z| remap_angle(z)).unzip()
}

/// Reverse sweep for the observable `sum_k w_k Z_k` (qubit `k` = position in
/// `weights`). `final_state` must be the output of `circuit.run()`.
pub fn adjoint_vjp<T: Real>(
    circuit: &Circuit<T>,
    final_state: StateVector<T>,
    weights: &[T],
    n_params: usize,
) -> Result<Vec<T>> {
    if weights.len() > circuit.n_qubits {
        return Err(Error::Dimension {
            what: "observable weights (one per measured qubit)",
            expected: circuit.n_qubits,
            got: weights.len(),
        });
    }
    let mut grads = vec![T::zero(); n_params];
    let mut lambda = final_state.clone();
    lambda.apply_weighted_z(weights);
    reverse_sweep(circuit, final_state, lambda, &mut grads)?;
    Ok(grads)
}

fn reverse_sweep<T: Real>(
    circuit: &Circuit<T>,
    mut psi: StateVector<T>,
    mut lambda: StateVector<T>,
    grads: &mut [T],
) -> Result<()> {
    let mut scratch = psi.clone();
    for op in circuit.ops.iter().rev() {
        if let (Some(p), Gate::Rot { axis, target, .. }) = (op.param, op.gate) {
            if p >= grads.len() {
                return Err(Error::Dimension { what: "parameter index", expected: grads.len(), got: p + 1 });
            }
            // d/dphi <psi|O|psi> = Im <lambda| A |psi_after>
            scratch.amplitudes_mut().copy_from_slice(psi.amplitudes());
            scratch.apply_pauli(axis, target);
            grads[p] += lambda.inner(&scratch).im;
        }
        let inv = op.gate.inverse();
        psi.apply_unchecked(&inv);
        lambda.apply_unchecked(&inv);
    }
    Ok(())
}

/// Full Jacobian `d<Z_k>/d param_p` for every qubit `k` in `observables`.
pub fn adjoint_jacobian<T: Real>(
    circuit: &Circuit<T>,
    observables: &[usize],
    n_params: usize,
) -> Result<Jacobian<T>> {
    let psi = circuit.run()?;
    let mut jac = Jacobian::zeros(observables.len(), n_params);
    for (row, &q) in observables.iter().enumerate() {
        if q >= circuit.n_qubits {
            return Err(Error::QubitIndex { index: q, n_qubits: circuit.n_qubits });
        }
        let mut weights = vec![T::zero(); q + 1];
        weights[q] = T::one();
        let mut lambda = psi.clone();
        lambda.apply_weighted_z(&weights);
        reverse_sweep(circuit, psi.clone(), lambda, jac.row_mut(row))?;
    }
    Ok(jac)
}

/// Shift-rule Jacobian: `(E(phi + s) - E(phi - s)) / (2 sin s)` per
/// parameter occurrence, summed when a parameter feeds several gates.
pub fn parameter_shift_jacobian<T: Real>(
    circuit: &Circuit<T>,
    observables: &[usize],
    n_params: usize,
    shift: T,
) -> Result<Jacobian<T>> {
    circuit.validate()?;
    let denom = T::lit(2.0) * shift.sin();
    if denom.abs() < T::epsilon() {
        return Err(Error::Domain { value: shift.as_f64(), expected: "shift with sin(s) != 0" });
    }
    let cones: Vec<Vec<bool>> = observables.iter().map(|&q| light_cone(circuit, q)).collect();
    let mut jac = Jacobian::zeros(observables.len(), n_params);
    let mut shifted = circuit.clone();
    for (i, op) in circuit.ops.iter().enumerate() {
        let (Some(p), Gate::Rot { angle, .. }) = (op.param, op.gate) else {
            continue;
        };
        if p >= n_params {
            return Err(Error::Dimension { what: "parameter index", expected: n_params, got: p + 1 });
        }
        let rows: Vec<usize> = (0..observables.len()).filter(|&r| cones[r][i]).collect();
        if rows.is_empty() {
            continue;
        }
        let observed: Vec<usize> = rows.iter().map(|&r| observables[r]).collect();
        shifted.ops[i].gate = op.gate.with_angle(angle + shift);
        let plus = shifted.expectations(&observed)?;
        shifted.ops[i].gate = op.gate.with_angle(angle - shift);
        let minus = shifted.expectations(&observed)?;
        shifted.ops[i].gate = op.gate;
        for ((&row, a), b) in rows.iter().zip(&plus).zip(&minus) {
            jac.data[row * n_params + p] += (*a - *b) / denom;
        }
    }
    Ok(jac)
}

/// Marks the ops that can influence `<Z_qubit>`: walking backwards, a gate
/// is inside the cone if it touches a qubit already in it, and a CNOT
/// pulls both of its qubits in.
fn light_cone<T: Real>(circuit: &Circuit<T>, qubit: usize) -> Vec<bool> {
    let mut live = vec![false; circuit.n_qubits];
    live[qubit] = true;
    let mut inside = vec![false; circuit.ops.len()];
    for (i, op) in circuit.ops.iter().enumerate().rev() {
        match op.gate {
            Gate::Rot { target, .. } => inside[i] = live[target],
            Gate::Cnot { control, target } => {
                if live[control] || live[target] {
                    inside[i] = true;
                    live[control] = true;
                    live[target] = true;
                }
            }
        }
    }
    inside
}

fn record<T: Real>(template: &CircuitTemplate, jacobian: Jacobian<T>) -> GradientRecord<T> {
    GradientRecord {
        n_outputs: template.n_outputs,
        n_layers: template.n_layers,
        n_qubits: template.n_qubits,
        jacobian,
    }
}

/// `d<Z_k>/d phi` for every remapped rotation angle of the VQC on `input`.
pub fn adjoint_gradient<T: Real>(
    template: &CircuitTemplate,
    params: &VqcParameters<T>,
    input: &[T],
) -> Result<GradientRecord<T>> {
    let circuit = template.build_circuit(params, input)?;
    let jac = adjoint_jacobian(&circuit, &template.measured_qubits(), template.theta_len())?;
    Ok(record(template, jac))
}

pub fn parameter_shift_gradient<T: Real>(
    template: &CircuitTemplate,
    params: &VqcParameters<T>,
    input: &[T],
    shift: T,
) -> Result<GradientRecord<T>> {
    let circuit = template.build_circuit(params, input)?;
    let jac = parameter_shift_jacobian(&circuit, &template.measured_qubits(), template.theta_len(), shift)?;
    Ok(record(template, jac))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn single_rx(phi: f64) -> Circuit<f64> {
        let mut c = Circuit::new(1);
        c.push_param(Gate::rx(0, phi), 0);
        c
    }

    #[test]
    fn rx_derivative_matches_minus_sine() {
        for (phi, want) in [(0.0, 0.0), (FRAC_PI_2, -1.0)] {
            let adj = adjoint_jacobian(&single_rx(phi), &[0], 1).unwrap();
            let ps = parameter_shift_jacobian(&single_rx(phi), &[0], 1, FRAC_PI_2).unwrap();
            assert_abs_diff_eq!(adj.get(0, 0), want, epsilon = 1e-14);
            assert_abs_diff_eq!(ps.get(0, 0), want, epsilon = 1e-14);
        }
    }

    #[test]
    fn remap_values() {
        assert_eq!(remap_angle(0.0), (0.0, PI));
        let (phi, _) = remap_angle(1.0f64);
        assert_abs_diff_eq!(phi, 2.392_618_6, epsilon = 1e-6);
        let (phi, d) = remap_angle(40.0f64);
        assert_abs_diff_eq!(phi, PI, epsilon = 1e-12);
        assert!(d < 1e-12);
    }

    #[test]
    fn disconnected_parameter_has_zero_gradient() {
        let mut c = Circuit::new(3);
        c.push_param(Gate::ry(0, 0.4), 0);
        c.push_param(Gate::rx(2, 1.1), 1);
        c.push(Gate::cnot(0, 1));
        let ps = parameter_shift_jacobian(&c, &[0, 1], 2, FRAC_PI_2).unwrap();
        assert_eq!(ps.get(0, 1), 0.0);
        assert_eq!(ps.get(1, 1), 0.0);
        let adj = adjoint_jacobian(&c, &[0, 1], 2).unwrap();
        assert_abs_diff_eq!(adj.get(0, 0), -(0.4f64).sin(), epsilon = 1e-14);
    }

    #[test]
    fn weighted_vjp_is_linear_combination_of_rows() {
        let mut c = Circuit::new(2);
        c.push_param(Gate::ry(0, 0.3), 0);
        c.push_param(Gate::rx(1, -0.8), 1);
        c.push(Gate::cnot(0, 1));
        c.push_param(Gate::rz(1, 0.2), 2);
        c.push_param(Gate::ry(1, 1.3), 3);
        let jac = adjoint_jacobian(&c, &[0, 1], 4).unwrap();
        let w = [0.7, -1.9];
        let vjp = adjoint_vjp(&c, c.run().unwrap(), &w, 4).unwrap();
        for p in 0..4 {
            assert_abs_diff_eq!(vjp[p], w[0] * jac.get(0, p) + w[1] * jac.get(1, p), epsilon = 1e-13);
        }
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut c = Circuit::new(1);
        c.push_param(Gate::rx(0, 0.3), 0);
        c.push_param(Gate::rx(0, 0.3), 0);
        // <Z> = cos(0.6) as a function of the shared angle a: d/da cos(2a) = -2 sin(2a)
        let adj = adjoint_jacobian(&c, &[0], 1).unwrap();
        let ps = parameter_shift_jacobian(&c, &[0], 1, FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(adj.get(0, 0), -2.0 * (0.6f64).sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(ps.get(0, 0), -2.0 * (0.6f64).sin(), epsilon = 1e-14);
    }
}
