//! Set-attention classification of quantum measurement snapshots.
//!
//! The crate trains permutation-invariant classifiers on *sets* of binary
//! measurement snapshots and provides everything that workflow needs:
//!
//! * [`tensor`] — a dense real-tensor core with reverse-mode automatic
//!   differentiation for exactly the primitive set the models use, plus a
//!   finite-difference gradient checker.
//! * [`model`] — the set-attention classifier: configurable front end
//!   (convolution / per-snapshot MLP / identity), mini-set self-attention
//!   encoder layers, pooling-attention decoder, and the moment-order
//!   accounting that relates mini-set count and depth to the distribution
//!   moments the architecture can access.
//! * [`baselines`] — parameter-matched reference models: a sum-pooled MLP and
//!   a pooling-attention-only classifier.
//! * [`train`] — two-term binary cross-entropy, Adam with L2 regularization,
//!   step learning-rate decay, seeded initialization schemes, and the epoch
//!   loop with periodic set re-partitioning.
//! * [`data`] — classically reproducible snapshot generators (toric-code
//!   ground-state sampler with a bit-flip channel, random-circuit state-vector
//!   simulator with fSim gates, a parity task that isolates a chosen moment
//!   order), set partitioning, and a bit-packed snapshot file format.
//! * [`analysis`] — linear cross-entropy benchmarking, confidence/accuracy
//!   summaries, pooling-attention interpretation against closed-loop
//!   observables, and sample-complexity estimation via one-sided t-tests.
//!
//! Everything that consumes randomness takes an explicit seed; identical
//! configuration and seeds reproduce identical bytes on disk.

pub mod analysis;
pub mod baselines;
pub mod data;
pub mod error;
pub mod model;
pub mod real;
pub mod seeds;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
