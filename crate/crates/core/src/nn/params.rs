use rand::Rng as _;

use super::tensor::Tensor;
use crate::seed::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter tensors of one model. Layers refer to entries by
/// [`ParamId`], so two layers holding the same id share storage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Adds a tensor with entries uniform in `±limit`.
    pub fn add_uniform(&mut self, name: impl Into<String>, shape: &[usize], limit: f64, rng: &mut Rng) -> ParamId {
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.random_range(-limit..=limit);
        }
        self.add(name, t)
    }

    pub fn add_const(&mut self, name: impl Into<String>, shape: &[usize], value: f64) -> ParamId {
        let mut t = Tensor::zeros(shape);
        t.fill(value);
        self.add(name, t)
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        self.values[id.0].data()
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.values[id.0].data_mut()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn scalar_count_of(&self, ids: &[ParamId]) -> usize {
        ids.iter().map(|&id| self.values[id.0].len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|t| t.data().iter().all(|v| v.is_finite()))
    }

    /// Sets every parameter to zero.
    pub fn zero_all(&mut self) {
        self.values.iter_mut().for_each(|t| t.fill(0.0));
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    values: Vec<Tensor>,
}

impl Grads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Grads { values: store.values.iter().map(|t| Tensor::zeros(t.shape())).collect() }
    }

    pub fn get(&self, id: ParamId) -> &[f64] {
        self.values[id.0].data()
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.values[id.0].data_mut()
    }

    pub fn zero(&mut self) {
        self.values.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn scale(&mut self, k: f64) {
        for t in &mut self.values {
            t.data_mut().iter_mut().for_each(|v| *v *= k);
        }
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.data_mut().iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|t| t.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
