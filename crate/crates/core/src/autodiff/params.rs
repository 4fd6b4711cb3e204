use std::ops::Index;

use super::{Gradients, Matrix, Result, Tape, Tensor};

/// Handle to one named tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Flat, ordered collection of named parameter tensors.
///
/// Model structures hold [`ParamId`]s into a store; the optimizer and the
/// checkpoint writer only ever see the flat list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. Names must be unique; panics otherwise.
    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name `{name}`"
        );
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
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

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Total number of scalar entries.
    pub fn n_scalars(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    /// Records every parameter as a leaf on `tape`.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Result<BoundParams<'t>> {
        let tensors = self
            .values
            .iter()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<_>>()?;
        Ok(BoundParams { tensors })
    }
}

/// Parameters recorded on a particular tape.
pub struct BoundParams<'t> {
    tensors: Vec<Tensor<'t>>,
}

impl<'t> BoundParams<'t> {
    /// Gradients for every parameter, in store order, zero-filled where the
    /// loss does not depend on a parameter.
    pub fn gradients(&self, grads: &Gradients) -> Vec<Matrix> {
        self.tensors.iter().map(|&t| grads.wrt(t)).collect()
    }
}

impl<'t> Index<ParamId> for BoundParams<'t> {
    type Output = Tensor<'t>;

    fn index(&self, id: ParamId) -> &Tensor<'t> {
        &self.tensors[id.0]
    }
}
