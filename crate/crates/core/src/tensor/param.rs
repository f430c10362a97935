//! Named parameter collections and their gradient buffers.
//!
//! A [`ParamSet`] owns the persistent state of a model — trainable tensors
//! plus non-trainable buffers such as running batch-norm statistics — in a
//! stable insertion order with by-name lookup. A [`GradBuffer`] holds one
//! gradient tensor per trainable parameter, aligned by index, and accumulates
//! across forward passes until explicitly cleared, which lets a training step
//! sum per-set gradients before a single optimizer update.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// One named tensor of persistent model state.
#[derive(Debug, Clone)]
pub struct Param<R: Real> {
    /// Unique, path-like name (e.g. `enc.0.sab.q`).
    pub name: String,
    /// Current value.
    pub value: Tensor<R>,
    /// Whether the optimizer updates this tensor. Non-trainable entries are
    /// buffers (running statistics) that persist and serialize with the model
    /// but receive no gradients.
    pub trainable: bool,
}

/// Ordered collection of named parameters with unique names.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<R: Real> {
    items: Vec<Param<R>>,
}

impl<R: Real> ParamSet<R> {
    pub fn new() -> Self {
        ParamSet { items: Vec::new() }
    }

    /// Appends a trainable parameter. Errors on duplicate names.
    pub fn add(&mut self, name: &str, value: Tensor<R>) -> Result<()> {
        self.insert(name, value, true)
    }

    /// Appends a non-trainable buffer. Errors on duplicate names.
    pub fn add_buffer(&mut self, name: &str, value: Tensor<R>) -> Result<()> {
        self.insert(name, value, false)
    }

    fn insert(&mut self, name: &str, value: Tensor<R>, trainable: bool) -> Result<()> {
        if self.index_of(name).is_some() {
            return Err(Error::config(format!("duplicate parameter name {name:?}")));
        }
        self.items.push(Param { name: name.to_string(), value, trainable });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.items.iter().position(|p| p.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Param<R>> {
        self.items.iter().find(|p| p.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Param<R>> {
        self.items.iter_mut().find(|p| p.name == name)
    }

    /// Parameter by name, as an error (not a panic) when absent.
    pub fn require(&self, name: &str) -> Result<&Param<R>> {
        self.get(name).ok_or_else(|| Error::config(format!("missing parameter {name:?}")))
    }

    pub fn at(&self, index: usize) -> &Param<R> {
        &self.items[index]
    }

    pub fn at_mut(&mut self, index: usize) -> &mut Param<R> {
        &mut self.items[index]
    }

    /// Insertion-order iteration over all entries (trainable and buffers).
    pub fn iter(&self) -> impl Iterator<Item = &Param<R>> {
        self.items.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param<R>> {
        self.items.iter_mut()
    }

    /// Number of scalar elements across trainable parameters.
    pub fn trainable_elements(&self) -> usize {
        self.items.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }
}

/// Per-parameter gradient accumulator aligned index-for-index with a
/// [`ParamSet`]. Slots for non-trainable buffers stay empty.
#[derive(Debug, Clone)]
pub struct GradBuffer<R: Real> {
    slots: Vec<Option<Tensor<R>>>,
}

impl<R: Real> GradBuffer<R> {
    /// An empty buffer shaped for `params`.
    pub fn zeros_like(params: &ParamSet<R>) -> Self {
        GradBuffer { slots: params.iter().map(|_| None).collect() }
    }

    /// Adds `grad` into the slot for parameter `index`. Accumulates across
    /// calls until [`GradBuffer::clear`].
    pub fn accumulate(&mut self, index: usize, grad: &Tensor<R>) -> Result<()> {
        match &mut self.slots[index] {
            Some(t) => {
                if t.shape() != grad.shape() {
                    return Err(Error::shape(
                        "grad_accumulate",
                        format!("{:?} += {:?}", t.shape(), grad.shape()),
                    ));
                }
                t.add_assign(grad);
            }
            slot => *slot = Some(grad.clone()),
        }
        Ok(())
    }

    /// Adds every gradient of `other` into this buffer.
    pub fn merge(&mut self, other: &GradBuffer<R>) -> Result<()> {
        if other.slots.len() != self.slots.len() {
            return Err(Error::shape(
                "grad_merge",
                format!("{} slots vs {}", self.slots.len(), other.slots.len()),
            ));
        }
        for (i, g) in other.slots.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(i, g)?;
            }
        }
        Ok(())
    }

    /// Multiplies every stored gradient by `c` (e.g. 1/batch for averaging).
    pub fn scale(&mut self, c: R) {
        for slot in self.slots.iter_mut().flatten() {
            slot.scale_assign(c);
        }
    }

    /// Gradient for parameter `index`, if any was accumulated.
    pub fn get(&self, index: usize) -> Option<&Tensor<R>> {
        self.slots.get(index).and_then(|s| s.as_ref())
    }

    /// Drops all accumulated gradients.
    pub fn clear(&mut self) {
        for slot in self.slots.iter_mut() {
            *slot = None;
        }
    }

    /// True if no slot holds a gradient.
    pub fn is_zero(&self) -> bool {
        self.slots.iter().all(|s| s.is_none())
    }
}
