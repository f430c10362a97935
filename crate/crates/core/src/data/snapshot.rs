//! A snapshot is one binary measurement outcome arranged on a 2-D grid.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::Tensor;

/// One binary measurement snapshot on a `rows × cols` grid, bit `(r, c)` at
/// index `r·cols + c`. Values are strictly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Snapshot {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl Snapshot {
    pub fn new(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 || bits.len() != rows * cols {
            return Err(Error::shape(
                "snapshot",
                format!("{} bits for a {rows}×{cols} grid", bits.len()),
            ));
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Format(format!("snapshot bit value {bad}, expected 0 or 1")));
        }
        Ok(Snapshot { rows, cols, bits })
    }

    /// All-zero snapshot.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Snapshot { rows, cols, bits: vec![0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut bits = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                bits.push(f(r, c));
            }
        }
        Snapshot::new(rows, cols, bits)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    /// Raw bits in row-major order.
    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of set bits.
    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Rectangular sub-grid `[r0, r0+rows) × [c0, c0+cols)`.
    pub fn window(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Result<Snapshot> {
        if r0 + rows > self.rows || c0 + cols > self.cols {
            return Err(Error::shape(
                "window",
                format!(
                    "{rows}×{cols} window at ({r0},{c0}) of a {}×{} snapshot",
                    self.rows, self.cols
                ),
            ));
        }
        Snapshot::from_fn(rows, cols, |r, c| self.get(r0 + r, c0 + c))
    }
}

/// Stacks equal-sized snapshots into a `[N, rows, cols]` tensor of 0/1 values.
pub fn set_to_tensor<R: Real>(set: &[Snapshot]) -> Result<Tensor<R>> {
    let first = set.first().ok_or_else(|| Error::shape("set_to_tensor", "empty set"))?;
    let (rows, cols) = (first.rows, first.cols);
    let mut data = Vec::with_capacity(set.len() * rows * cols);
    for s in set {
        if s.rows != rows || s.cols != cols {
            return Err(Error::shape(
                "set_to_tensor",
                format!("mixed grids {}×{} and {rows}×{cols}", s.rows, s.cols),
            ));
        }
        data.extend(s.bits.iter().map(|&b| R::from_f64(b as f64)));
    }
    Tensor::from_vec(&[set.len(), rows, cols], data)
}
