//! Named parameter registry.

use std::collections::{BTreeMap, HashMap};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Index of a parameter inside its [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub struct Parameter {
    name: String,
    value: Tensor,
    grad: Tensor,
    pub trainable: bool,
}

impl Parameter {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn grad(&self) -> &Tensor {
        &self.grad
    }

    pub fn value_mut(&mut self) -> &mut [f64] {
        self.value.data_mut()
    }

    pub fn grad_mut(&mut self) -> &mut [f64] {
        self.grad.data_mut()
    }

    /// Split borrow used by optimizers.
    pub fn value_and_grad_mut(&mut self) -> (&mut [f64], &[f64]) {
        (self.value.data_mut(), self.grad.data())
    }
}

/// Gradient produced by one backward pass for a single parameter.
///
/// Embedding lookups only touch a few rows of a large table, so their
/// gradients stay row-sparse until they are merged into the store.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamGrad {
    Dense(Tensor),
    Rows {
        shape: Vec<usize>,
        rows: BTreeMap<usize, Vec<f64>>,
    },
}

impl ParamGrad {
    pub fn to_dense(&self) -> Tensor {
        match self {
            ParamGrad::Dense(t) => t.clone(),
            ParamGrad::Rows { shape, rows } => {
                let mut t = Tensor::zeros(shape);
                let cols = t.cols();
                for (r, vals) in rows {
                    t.data_mut()[r * cols..(r + 1) * cols].copy_from_slice(vals);
                }
                t
            }
        }
    }
}

/// Gradients for every parameter touched by a backward pass, ordered by id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Gradients {
    pub(crate) entries: Vec<(ParamId, ParamGrad)>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&ParamGrad> {
        self.entries.iter().find(|(p, _)| *p == id).map(|(_, g)| g)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ParamId, ParamGrad)> {
        self.entries.iter()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Tensor, trainable: bool) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        value.require_rank2("register")?;
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter {
            name: name.to_owned(),
            value,
            grad,
            trainable,
        });
        self.by_name.insert(name.to_owned(), id);
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Replaces a value, keeping the registered shape.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::Dimension {
                op: "set_value",
                left: p.value.shape().to_vec(),
                right: value.shape().to_vec(),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Adds a backward pass's gradients into the accumulators.
    pub fn accumulate(&mut self, grads: &Gradients) {
        for (id, g) in &grads.entries {
            let p = &mut self.params[id.0];
            match g {
                ParamGrad::Dense(t) => p.grad.add_assign(t),
                ParamGrad::Rows { rows, .. } => {
                    let cols = p.grad.cols();
                    let data = p.grad.data_mut();
                    for (r, vals) in rows {
                        for (a, b) in data[r * cols..(r + 1) * cols].iter_mut().zip(vals) {
                            *a += b;
                        }
                    }
                }
            }
        }
    }

    /// Global L2 norm over all trainable gradients.
    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.grad.sum_squares())
            .sum::<f64>()
            .sqrt()
    }

    /// Σ‖θ‖² over trainable parameters.
    pub fn sum_squares(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .map(|p| p.value.sum_squares())
            .sum()
    }

    pub fn value_norms(&self) -> Vec<(String, f64)> {
        self.params
            .iter()
            .map(|p| (p.name.clone(), p.value.sum_squares().sqrt()))
            .collect()
    }

    /// Rounds every value through `f32`, matching what a checkpoint stores.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            p.value = p.value.to_f32_precision();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut s = ParamStore::new();
        s.register("w", Tensor::zeros(&[2, 2]), true).unwrap();
        assert!(s.register("w", Tensor::zeros(&[1, 1]), true).is_err());
    }

    #[test]
    fn grad_tracks_value_shape() {
        let mut s = ParamStore::new();
        let id = s.register("w", Tensor::zeros(&[3, 2]), true).unwrap();
        assert_eq!(s.get(id).grad().shape(), s.get(id).value().shape());
        assert!(s.set_value(id, Tensor::zeros(&[2, 3])).is_err());
    }

    #[test]
    fn sparse_rows_accumulate_into_dense_grad() {
        let mut s = ParamStore::new();
        let id = s.register("e", Tensor::zeros(&[3, 2]), true).unwrap();
        let mut rows = BTreeMap::new();
        rows.insert(1, vec![1.0, 2.0]);
        let g = Gradients {
            entries: vec![(
                id,
                ParamGrad::Rows {
                    shape: vec![3, 2],
                    rows,
                },
            )],
        };
        s.accumulate(&g);
        s.accumulate(&g);
        assert_eq!(s.get(id).grad().data(), &[0.0, 0.0, 2.0, 4.0, 0.0, 0.0]);
    }
}
