//! Dense real tensors with reverse-mode automatic differentiation.
//!
//! The submodules provide exactly the primitive set the classifiers need:
//!
//! * [`Tensor`] — a dense row-major value type (no gradient state of its own);
//! * [`tape::Tape`] — a define-by-run graph; every primitive records enough
//!   context to propagate gradients in one reverse sweep;
//! * [`param::ParamSet`] / [`param::GradBuffer`] — named, persistent model
//!   parameters and their accumulated gradients (gradients accumulate until
//!   explicitly zeroed);
//! * [`gradcheck`] — a central-finite-difference checker that validates every
//!   trainable parameter of an arbitrary scalar loss.
//!
//! Conventions used throughout: matrices are `[rows, cols]` row-major; batched
//! feature tensors are `[element, feature]`; convolution activations are
//! `[element, channel, row, col]`. The feature axis is always the last one.

pub mod gradcheck;
pub mod param;
pub mod tape;

pub use gradcheck::{gradient_check, GradCheckReport, GradCheckSettings};
pub use param::{GradBuffer, Param, ParamSet};
pub use tape::{BatchStats, Tape, Var};

use crate::error::{Error, Result};
use crate::real::Real;

/// Dense row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<R: Real> {
    shape: Vec<usize>,
    data: Vec<R>,
}

impl<R: Real> Tensor<R> {
    /// Zero-filled tensor of the given shape.
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![R::zero(); shape.iter().product()] }
    }

    /// Tensor filled with a constant.
    pub fn filled(shape: &[usize], v: R) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    /// Wraps existing data; the element count must match the shape.
    pub fn from_vec(shape: &[usize], data: Vec<R>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::shape(
                "from_vec",
                format!("shape {shape:?} wants {want} elements, got {}", data.len()),
            ));
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Builds a tensor by evaluating `f` at each flat index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> R) -> Self {
        let n: usize = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(&mut f).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    /// Row count of a 2-D tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Column count of a 2-D tensor.
    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    /// Element of a 2-D tensor.
    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> R {
        self.data[i * self.cols() + j]
    }

    /// Row `i` of a 2-D tensor as a slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[R] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// Single element of a one-element tensor.
    pub fn scalar(&self) -> R {
        debug_assert_eq!(self.data.len(), 1, "scalar() on tensor of len {}", self.data.len());
        self.data[0]
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let want: usize = shape.iter().product();
        if want != self.data.len() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} ({} elems) -> {shape:?} ({want} elems)", self.shape, self.data.len()),
            ));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// True when every element is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts every element to `f64`.
    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|&v| Real::to_f64(v)).collect()
    }

    /// Element-wise `self += other` (shapes must match).
    pub fn add_assign(&mut self, other: &Tensor<R>) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    /// Element-wise `self *= c`.
    pub fn scale_assign(&mut self, c: R) {
        for a in self.data.iter_mut() {
            *a *= c;
        }
    }
}
