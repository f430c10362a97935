//! Measurement-snapshot datasets: the binary snapshot type, set batching,
//! bitstring generators (stabilizer sampling, circuit simulation, synthetic
//! parity states), and the on-disk container format.

pub mod format;
pub mod parity;
pub mod rqc;
pub mod sets;
pub mod snapshot;
pub mod toric;

pub use snapshot::{set_to_tensor, Snapshot};
