use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fully connected feed-forward network with ReLU hidden layers and an
/// affine output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet<T> {
    sizes: Vec<usize>,
    /// Per layer, `out x in` row-major.
    weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
}

pub fn dense_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    /// Input to every layer (the network input first).
    pub(crate) inputs: Vec<Vec<T>>,
    /// Pre-activations of every layer.
    pub(crate) pre: Vec<Vec<T>>,
}

impl<T: Real> DenseNet<T> {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Config(format!("invalid layer sizes {sizes:?}")));
        }
        let weights = sizes.windows(2).map(|w| vec![T::zero(); w[0] * w[1]]).collect();
        let biases = sizes.windows(2).map(|w| vec![T::zero(); w[1]]).collect();
        Ok(Self { sizes: sizes.to_vec(), weights, biases })
    }

    /// Weights and biases uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn init<R: Rng>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for (l, w) in sizes.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for v in net.weights[l].iter_mut().chain(net.biases[l].iter_mut()) {
                *v = T::lit(rng.gen_range(-bound..=bound));
            }
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn param_count(&self) -> usize {
        dense_param_count(&self.sizes)
    }

    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension { what: "dense flat parameters", expected: self.param_count(), got: flat.len() });
        }
        let mut rest = flat;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (head, tail) = rest.split_at(w.len());
            w.copy_from_slice(head);
            let (head, tail) = tail.split_at(b.len());
            b.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn logits(&self, input: &[T]) -> Result<(Vec<T>, DenseCache<T>)> {
        if input.len() != self.sizes[0] {
            return Err(Error::Dimension { what: "NN input", expected: self.sizes[0], got: input.len() });
        }
        let n_layers = self.weights.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut a = input.to_vec();
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let z: Vec<T> = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    row.iter().zip(&a).map(|(&w, &x)| w * x).sum::<T>() + self.biases[l][o]
                })
                .collect();
            let next = if l + 1 < n_layers { z.iter().map(|&v| relu(v)).collect() } else { z.clone() };
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        Ok((a, DenseCache { inputs, pre }))
    }

    pub fn backward(&self, cache: DenseCache<T>, dlogits: &[T]) -> Result<Vec<T>> {
        let n_layers = self.weights.len();
        let k = self.sizes[n_layers];
        if dlogits.len() != k {
            return Err(Error::Dimension { what: "logit gradient", expected: k, got: dlogits.len() });
        }
        let mut per_layer: Vec<(Vec<T>, Vec<T>)> = Vec::with_capacity(n_layers);
        let mut delta = dlogits.to_vec();
        for l in (0..n_layers).rev() {
            let n_in = self.sizes[l];
            let a = &cache.inputs[l];
            let mut dw = vec![T::zero(); self.weights[l].len()];
            for (o, &d) in delta.iter().enumerate() {
                for (i, &x) in a.iter().enumerate() {
                    dw[o * n_in + i] = d * x;
                }
            }
            let db = delta.clone();
            if l > 0 {
                let z_prev = &cache.pre[l - 1];
                delta = (0..n_in)
                    .map(|i| {
                        if z_prev[i] > T::zero() {
                            delta.iter().enumerate().map(|(o, &d)| d * self.weights[l][o * n_in + i]).sum()
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
            }
            per_layer.push((dw, db));
        }
        let mut grads = Vec::with_capacity(self.param_count());
        for (dw, db) in per_layer.into_iter().rev() {
            grads.extend(dw);
            grads.extend(db);
        }
        Ok(grads)
    }
}

#[inline]
pub fn relu<T: Real>(z: T) -> T {
    z.max(T::zero())
}
