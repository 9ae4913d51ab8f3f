//! Dense statevector simulation.
//!
//! Qubit 0 is the most significant bit of the basis index: for an `n`-qubit
//! register, qubit `q` selects bit `n - 1 - q`. Rotations follow
//! `R_A(phi) = exp(-i phi A / 2)` for `A` in {X, Y, Z}.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate<T> {
    Rot { axis: Axis, target: usize, angle: T },
    Cnot { control: usize, target: usize },
}

impl<T: Real> Gate<T> {
    pub fn rx(target: usize, angle: T) -> Self {
        Gate::Rot { axis: Axis::X, target, angle }
    }

    pub fn ry(target: usize, angle: T) -> Self {
        Gate::Rot { axis: Axis::Y, target, angle }
    }

    pub fn rz(target: usize, angle: T) -> Self {
        Gate::Rot { axis: Axis::Z, target, angle }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Inverse gate: negated angle for rotations, CNOT is self-inverse.
    pub fn inverse(&self) -> Self {
        match *self {
            Gate::Rot { axis, target, angle } => Gate::Rot { axis, target, angle: -angle },
            cx @ Gate::Cnot { .. } => cx,
        }
    }

    /// Same gate with its rotation angle replaced; CNOT is returned unchanged.
    pub fn with_angle(&self, new_angle: T) -> Self {
        match *self {
            Gate::Rot { axis, target, .. } => Gate::Rot { axis, target, angle: new_angle },
            cx @ Gate::Cnot { .. } => cx,
        }
    }

    pub fn qubits(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Rot { target, .. } => (target, None),
            Gate::Cnot { control, target } => (target, Some(control)),
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |index: usize| {
            if index < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitIndex { index, n_qubits })
            }
        };
        match *self {
            Gate::Rot { target, angle, .. } => {
                check(target)?;
                if !angle.is_finite() {
                    return Err(Error::NonFinite(format!("rotation angle on qubit {target}")));
                }
                Ok(())
            }
            Gate::Cnot { control, target } => {
                check(control)?;
                check(target)?;
                if control == target {
                    return Err(Error::ControlEqualsTarget(control));
                }
                Ok(())
            }
        }
    }

    /// 2x2 matrix of a rotation gate, row-major.
    pub fn rotation_matrix(axis: Axis, angle: T) -> [[Complex<T>; 2]; 2] {
        let half = angle / T::lit(2.0);
        let (s, c) = half.sin_cos();
        let zero = T::zero();
        match axis {
            Axis::X => [
                [Complex::new(c, zero), Complex::new(zero, -s)],
                [Complex::new(zero, -s), Complex::new(c, zero)],
            ],
            Axis::Y => [
                [Complex::new(c, zero), Complex::new(-s, zero)],
                [Complex::new(s, zero), Complex::new(c, zero)],
            ],
            Axis::Z => [
                [Complex::new(c, -s), Complex::new(zero, zero)],
                [Complex::new(zero, zero), Complex::new(c, s)],
            ],
        }
    }
}

/// Which classical-to-quantum encoding a circuit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingKind {
    Angle,
    Amplitude,
}

impl EmbeddingKind {
    /// Number of qubits the embedding needs for `dim` input features.
    pub fn qubits_for(self, dim: usize) -> usize {
        match self {
            EmbeddingKind::Angle => dim,
            EmbeddingKind::Amplitude => ceil_log2(dim).max(1),
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            EmbeddingKind::Angle => "Ang",
            EmbeddingKind::Amplitude => "Amp",
        }
    }
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    n_qubits: usize,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(n_qubits));
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); 1 << n_qubits];
        amps[0] = Complex::new(T::one(), T::zero());
        Ok(Self { n_qubits, amps })
    }

    /// Wraps raw amplitudes. The length must be a power of two; no
    /// normalization is performed.
    pub fn from_amplitudes(amps: Vec<Complex<T>>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::Dimension {
                what: "amplitude vector length (power of two >= 2)",
                expected: len.next_power_of_two().max(2),
                got: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(n_qubits));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<T> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v)
    }

    #[inline]
    fn mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    fn check_qubit(&self, index: usize) -> Result<()> {
        if index < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitIndex { index, n_qubits: self.n_qubits })
        }
    }

    pub fn apply(&mut self, gate: &Gate<T>) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub fn apply_all<'a, I>(&mut self, gates: I) -> Result<()>
    where
        I: IntoIterator<Item = &'a Gate<T>>,
    {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }

    /// Applies a gate whose indices were already validated against this register.
    pub(crate) fn apply_unchecked(&mut self, gate: &Gate<T>) {
        match *gate {
            Gate::Rot { axis, target, angle } => {
                let m = Gate::rotation_matrix(axis, angle);
                self.apply_single(target, &m);
            }
            Gate::Cnot { control, target } => {
                let cm = self.mask(control);
                let tm = self.mask(target);
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
        }
    }

    fn apply_single(&mut self, qubit: usize, m: &[[Complex<T>; 2]; 2]) {
        let stride = self.mask(qubit);
        let len = self.amps.len();
        let mut base = 0;
        while base < len {
            for i in base..base + stride {
                let a0 = self.amps[i];
                let a1 = self.amps[i + stride];
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i + stride] = m[1][0] * a0 + m[1][1] * a1;
            }
            base += 2 * stride;
        }
    }

    /// Multiplies the state by the Pauli operator `axis` on `qubit` (not a
    /// rotation; used for generator insertion in gradients).
    pub(crate) fn apply_pauli(&mut self, axis: Axis, qubit: usize) {
        let stride = self.mask(qubit);
        let i_unit = Complex::new(T::zero(), T::one());
        for i in 0..self.amps.len() {
            if i & stride != 0 {
                continue;
            }
            let j = i | stride;
            let (a0, a1) = (self.amps[i], self.amps[j]);
            match axis {
                Axis::X => {
                    self.amps[i] = a1;
                    self.amps[j] = a0;
                }
                Axis::Y => {
                    self.amps[i] = -i_unit * a1;
                    self.amps[j] = i_unit * a0;
                }
                Axis::Z => {
                    self.amps[j] = -a1;
                }
            }
        }
    }

    /// `<Z_qubit>` in `[-1, 1]`.
    pub fn expectation_z(&self, qubit: usize) -> Result<T> {
        self.check_qubit(qubit)?;
        Ok(self.expectation_z_unchecked(qubit))
    }

    pub(crate) fn expectation_z_unchecked(&self, qubit: usize) -> T {
        let m = self.mask(qubit);
        let e: T = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i & m == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum();
        e.max(-T::one()).min(T::one())
    }

    /// Multiplies each amplitude by the diagonal observable `sum_k w_k Z_k`.
    pub(crate) fn apply_weighted_z(&mut self, weights: &[T]) {
        let masks: Vec<usize> = (0..weights.len()).map(|k| self.mask(k)).collect();
        for (i, a) in self.amps.iter_mut().enumerate() {
            let d: T = weights
                .iter()
                .zip(&masks)
                .map(|(&w, &m)| if i & m == 0 { w } else { -w })
                .sum();
            *a *= d;
        }
    }
}

pub fn init_zero<T: Real>(n_qubits: usize) -> Result<StateVector<T>> {
    StateVector::zero(n_qubits)
}

pub fn apply_gate<T: Real>(mut state: StateVector<T>, gate: &Gate<T>) -> Result<StateVector<T>> {
    state.apply(gate)?;
    Ok(state)
}

pub fn pauli_z_expectation<T: Real>(state: &StateVector<T>, qubit: usize) -> Result<T> {
    state.expectation_z(qubit)
}

/// `RX(pi * x_i)` on qubit `i` for each feature. Features must lie in `[0, 1]`.
pub fn angle_embedding_gates<T: Real>(features: &[T], n_qubits: usize) -> Result<Vec<Gate<T>>> {
    if features.len() > n_qubits {
        return Err(Error::Dimension {
            what: "angle embedding features (at most one per qubit)",
            expected: n_qubits,
            got: features.len(),
        });
    }
    features
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !(x >= T::zero() && x <= T::one()) {
                return Err(Error::Domain { value: x.as_f64(), expected: "[0, 1]" });
            }
            Ok(Gate::rx(i, T::PI() * x))
        })
        .collect()
}

pub fn angle_embed<T: Real>(mut state: StateVector<T>, features: &[T]) -> Result<StateVector<T>> {
    let gates = angle_embedding_gates(features, state.n_qubits())?;
    state.apply_all(&gates)?;
    Ok(state)
}

/// Zero-pads `features` to `2^n_qubits` entries and L2-normalizes.
pub fn normalized_padded<T: Real>(features: &[T], n_qubits: usize) -> Result<Vec<T>> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::Capacity(n_qubits));
    }
    let dim = 1usize << n_qubits;
    if features.len() > dim {
        return Err(Error::Dimension {
            what: "amplitude embedding features (at most 2^n_qubits)",
            expected: dim,
            got: features.len(),
        });
    }
    if let Some(&bad) = features.iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(Error::Domain { value: bad.as_f64(), expected: "non-negative finite reals" });
    }
    let norm = features.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm == T::zero() {
        return Err(Error::Normalization);
    }
    let mut out = vec![T::zero(); dim];
    for (o, &v) in out.iter_mut().zip(features) {
        *o = v / norm;
    }
    Ok(out)
}

/// Gate sequence preparing the normalized, zero-padded `features` from
/// `|0...0>`, built from uniformly controlled RY rotations.
///
/// Stage `k` rotates qubit `k` conditioned on qubits `0..k`. Each uniformly
/// controlled rotation is expanded into `2^k` RY gates interleaved with
/// `2^k` CNOTs following a Gray-code walk over the controls. Only
/// non-negative real amplitudes are supported, so no phase stage is needed.
pub fn mottonen_gates<T: Real>(features: &[T], n_qubits: usize) -> Result<Vec<Gate<T>>> {
    let target = normalized_padded(features, n_qubits)?;
    let probs: Vec<T> = target.iter().map(|&a| a * a).collect();
    let mut gates = Vec::new();
    for k in 0..n_qubits {
        let block = 1usize << (n_qubits - k);
        let half = block / 2;
        // alpha_j for every control pattern j of qubits 0..k (qubit 0 = MSB of j).
        let alphas: Vec<T> = probs
            .chunks(block)
            .map(|chunk| {
                let p0: T = chunk[..half].iter().copied().sum();
                let p1: T = chunk[half..].iter().copied().sum();
                T::lit(2.0) * p1.sqrt().atan2(p0.sqrt())
            })
            .collect();
        uniformly_controlled_ry(&alphas, k, &mut gates);
    }
    Ok(gates)
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

/// Appends a uniformly controlled RY on `target` with controls `0..target`.
///
/// With `theta_i = 2^-k * sum_j (-1)^{popcount(gray(i) & j)} alpha_j`, the
/// rotation seen by control pattern `j` is exactly `alpha_j`.
fn uniformly_controlled_ry<T: Real>(alphas: &[T], target: usize, gates: &mut Vec<Gate<T>>) {
    let k = target;
    if k == 0 {
        gates.push(Gate::ry(0, alphas[0]));
        return;
    }
    let count = 1usize << k;
    let scale = T::one() / T::from_usize(count).unwrap();
    for i in 0..count {
        let g = gray(i);
        let theta = alphas
            .iter()
            .enumerate()
            .map(|(j, &a)| if (g & j).count_ones().is_multiple_of(2) { a } else { -a })
            .sum::<T>()
            * scale;
        gates.push(Gate::ry(target, theta));
        let flipped = g ^ gray((i + 1) % count);
        let bit = flipped.trailing_zeros() as usize;
        // bit b of the control pattern belongs to control qubit k - 1 - b
        gates.push(Gate::cnot(k - 1 - bit, target));
    }
}

/// `|0...0>` followed by the amplitude-embedding gate sequence.
pub fn amplitude_embed<T: Real>(features: &[T], n_qubits: usize) -> Result<StateVector<T>> {
    let gates = mottonen_gates(features, n_qubits)?;
    let mut state = StateVector::zero(n_qubits)?;
    state.apply_all(&gates)?;
    Ok(state)
}
