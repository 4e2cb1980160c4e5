use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// One named parameter block inside a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Flat view of every model parameter with a stable index per entry.
///
/// Blocks are laid out contiguously in declaration order, so index `i` names
/// the same scalar parameter for the lifetime of a model. Gradients, Fisher
/// diagonals, path accumulators and anchors all share this indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<ParamSpec>,
}

impl ParamVector {
    /// Builds an all-zero vector from `(name, shape)` pairs.
    pub fn zeros_with_layout<I, S>(blocks: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<usize>)>,
        S: Into<String>,
    {
        let mut offset = 0;
        let layout: Vec<ParamSpec> = blocks
            .into_iter()
            .map(|(name, shape)| {
                let spec = ParamSpec {
                    name: name.into(),
                    shape,
                    offset,
                };
                offset += spec.len();
                spec
            })
            .collect();
        Self {
            values: vec![0.0; offset],
            layout,
        }
    }

    /// Validates contiguity and length before accepting `values`.
    pub fn from_parts(layout: Vec<ParamSpec>, values: Vec<f64>) -> Result<Self> {
        let mut offset = 0;
        for spec in &layout {
            if spec.offset != offset || spec.shape.iter().any(|&d| d == 0) {
                return Err(Error::Layout(format!(
                    "block {} at offset {} (expected {offset})",
                    spec.name, spec.offset
                )));
            }
            offset += spec.len();
        }
        if offset != values.len() {
            return Err(Error::Layout(format!(
                "layout covers {offset} values, got {}",
                values.len()
            )));
        }
        Ok(Self { values, layout })
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::Layout(format!(
                "expected {} values, got {}",
                self.values.len(),
                values.len()
            )));
        }
        Ok(Self {
            values,
            layout: self.layout.clone(),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            layout: self.layout.clone(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn layout(&self) -> &[ParamSpec] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, index: usize) -> &[f64] {
        &self.values[self.layout[index].range()]
    }

    pub fn block_mut(&mut self, index: usize) -> &mut [f64] {
        let r = self.layout[index].range();
        &mut self.values[r]
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.layout.iter().position(|s| s.name == name)
    }

    /// Copies one block out as a tensor.
    pub fn tensor(&self, index: usize) -> Tensor {
        let spec = &self.layout[index];
        Tensor::from_parts(spec.shape.clone(), self.block(index).to_vec())
    }

    /// Splits into one tensor per block.
    pub fn unflatten(&self) -> Vec<Tensor> {
        (0..self.layout.len()).map(|i| self.tensor(i)).collect()
    }

    /// Inverse of [`ParamVector::unflatten`].
    pub fn flatten(&self, tensors: &[Tensor]) -> Result<Self> {
        if tensors.len() != self.layout.len() {
            return Err(Error::Layout(format!(
                "expected {} blocks, got {}",
                self.layout.len(),
                tensors.len()
            )));
        }
        let mut values = Vec::with_capacity(self.values.len());
        for (spec, t) in self.layout.iter().zip(tensors) {
            if t.shape() != spec.shape.as_slice() {
                return Err(Error::Layout(format!(
                    "block {} has shape {:?}, got {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
            values.extend_from_slice(t.values());
        }
        Ok(Self {
            values,
            layout: self.layout.clone(),
        })
    }

    /// Errors unless `other` has the identical layout.
    pub fn check_aligned(&self, other: &ParamVector) -> Result<()> {
        if self.layout != other.layout {
            return Err(Error::Layout("parameter layouts differ".into()));
        }
        Ok(())
    }

    pub fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.values.len() {
            return Err(Error::Layout(format!(
                "{what} has {len} entries, parameter count is {}",
                self.values.len()
            )));
        }
        Ok(())
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &ParamVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}
