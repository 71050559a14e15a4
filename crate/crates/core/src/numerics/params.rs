use indexmap::IndexMap;

use super::tensor::{Element, Tensor};
use crate::error::{Error, Result};

/// Ordered, uniquely named parameter tensors.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    params: IndexMap<String, Tensor<T>>,
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            params: IndexMap::new(),
        }
    }

    /// Appends a parameter and returns its index.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<usize> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let (idx, _) = self.params.insert_full(name, value);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn by_index(&self, idx: usize) -> &Tensor<T> {
        &self.params[idx]
    }

    pub fn name(&self, idx: usize) -> &str {
        self.params
            .get_index(idx)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    pub fn set(&mut self, idx: usize, value: Tensor<T>) {
        self.params[idx] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Name and shape of every parameter, in order.
    pub fn inventory(&self) -> Vec<(String, Vec<usize>)> {
        self.params
            .iter()
            .map(|(k, v)| (k.clone(), v.shape().to_vec()))
            .collect()
    }

    pub fn total_elements(&self) -> usize {
        self.params.values().map(Tensor::numel).sum()
    }

    /// Bit-identical names, shapes and values.
    pub fn bit_eq(&self, other: &ParamStore<T>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|((ka, va), (kb, vb))| ka == kb && va.bit_eq(vb))
    }

    pub fn cast<U: Element>(&self) -> ParamStore<U> {
        ParamStore {
            params: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }
}
