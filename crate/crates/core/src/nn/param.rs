//! Central parameter and state registries. Layers register tensors at
//! construction and hold typed ids; gradients live in a parallel array so a
//! backward pass can run against immutable parameters. Registration order is
//! fixed per model config, which makes optimizer state, checkpoints, and
//! finite-difference sweeps deterministic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::{real, Real};
use crate::tensor::Tensor;

/// Handle to a trainable tensor inside a [`Vars`] registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Handle to a non-trainable state tensor inside a [`States`] registry
/// (batch-norm running statistics).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateId(pub usize);

#[derive(Debug, Clone)]
pub struct Vars<S> {
    names: Vec<String>,
    values: Vec<Tensor<S>>,
}

impl<S: Real> Vars<S> {
    pub fn new() -> Self {
        Vars {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Register a weight drawn from U(-bound, bound) with bound = 1/sqrt(fan_in).
    pub fn add_uniform(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n: usize = shape.iter().product();
        let data: Vec<S> = (0..n)
            .map(|_| real(rng.gen_range(-bound..bound)))
            .collect();
        self.add(name, Tensor::from_vec(shape, data))
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.values[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.values.iter())
    }

    pub fn total_elements(&self) -> usize {
        self.values.iter().map(|t| t.numel()).sum()
    }

    /// Flatten all parameters into one vector (finite-difference sweeps,
    /// parameter hashing).
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.total_elements());
        for t in &self.values {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`Vars::flatten`].
    pub fn load_flat(&mut self, flat: &[S]) {
        assert_eq!(flat.len(), self.total_elements());
        let mut off = 0;
        for t in &mut self.values {
            let n = t.numel();
            t.data_mut().copy_from_slice(&flat[off..off + n]);
            off += n;
        }
    }

    /// Mutable access to one scalar by flat offset (finite differences).
    pub fn flat_entry_mut(&mut self, mut idx: usize) -> &mut S {
        for t in &mut self.values {
            if idx < t.numel() {
                return &mut t.data_mut()[idx];
            }
            idx -= t.numel();
        }
        panic!("flat index out of range");
    }

    pub fn cast<T: Real>(&self) -> Vars<T> {
        Vars {
            names: self.names.clone(),
            values: self.values.iter().map(|t| t.cast()).collect(),
        }
    }
}

impl<S: Real> Default for Vars<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient buffers parallel to a [`Vars`] registry.
#[derive(Debug, Clone)]
pub struct Grads<S> {
    g: Vec<Tensor<S>>,
}

impl<S: Real> Grads<S> {
    pub fn zeros_like(vars: &Vars<S>) -> Self {
        Grads {
            g: vars.values.iter().map(|t| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.g[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.g[id.0]
    }

    pub fn zero(&mut self) {
        for t in &mut self.g {
            t.fill(S::zero());
        }
    }

    /// Accumulate another gradient set (fixed order, deterministic).
    pub fn add_assign(&mut self, other: &Grads<S>) {
        assert_eq!(self.g.len(), other.g.len());
        for (a, b) in self.g.iter_mut().zip(other.g.iter()) {
            for (av, bv) in a.data_mut().iter_mut().zip(b.data().iter()) {
                *av = *av + *bv;
            }
        }
    }

    pub fn scale(&mut self, factor: S) {
        for t in &mut self.g {
            for v in t.data_mut() {
                *v = *v * factor;
            }
        }
    }

    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::new();
        for t in &self.g {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Global L2 norm over every gradient entry.
    pub fn global_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for t in &self.g {
            for v in t.data() {
                let x = v.to_f64_c();
                acc += x * x;
            }
        }
        acc.sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.g.iter().all(|t| t.assert_finite("grads").is_ok())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.g.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.g.iter_mut()
    }
}

#[derive(Debug, Clone)]
pub struct States<S> {
    names: Vec<String>,
    values: Vec<Tensor<S>>,
}

impl<S: Real> States<S> {
    pub fn new() -> Self {
        States {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> StateId {
        self.names.push(name.into());
        self.values.push(value);
        StateId(self.values.len() - 1)
    }

    pub fn get(&self, id: StateId) -> &Tensor<S> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: StateId) -> &mut Tensor<S> {
        &mut self.values[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<S>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.values.iter())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<S: Real> Default for States<S> {
    fn default() -> Self {
        Self::new()
    }
}
