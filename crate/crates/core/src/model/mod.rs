//! Set classifiers over measurement snapshots.
//!
//! [`SetAttentionClassifier`] is the main architecture: a per-snapshot front
//! end, a stack of mini-set attention layers, attention pooling, and a
//! logistic confidence head. The [`SetClassifier`] trait is the common
//! surface the training loop and the reference models in
//! [`crate::baselines`] share.

pub mod blocks;
pub mod checkpoint;
pub mod config;
pub mod moments;
pub mod plan;
pub mod quan;

pub use checkpoint::{load_checkpoint, save_checkpoint, LoadedCheckpoint};
pub use config::{Activation, FrontEnd, ModelConfig};
pub use moments::{layers_required, moment_order};
pub use plan::MiniSetPlan;
pub use quan::SetAttentionClassifier;

use rand::RngCore;

use crate::data::sets::{canonical_order, reorder, restore_order};
use crate::data::snapshot::{set_to_tensor, Snapshot};
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{BatchStats, GradBuffer, ParamSet, Tape, Tensor, Var};

/// Whether a forward pass uses training-time stochasticity (fresh mini-set
/// plans, batch-statistics normalization) or deterministic evaluation.
pub enum ForwardMode<'a> {
    Train { plan_rng: &'a mut dyn RngCore },
    Eval,
}

/// Handles into the tape produced by one forward pass over one set.
pub struct ForwardOutput<R: Real> {
    /// Scalar confidence in (0,1), shape `[1, 1]`.
    pub confidence: Var,
    /// Pooling attention scores `[1, n]`, when the architecture has them.
    pub scores: Option<Var>,
    /// Batch statistics from a training-mode batch norm, if one ran.
    pub batch_stats: Option<BatchStats<R>>,
    /// Tape handle per parameter index (`None` for non-trainable buffers).
    pub param_vars: Vec<Option<Var>>,
}

/// Common surface of every trainable set classifier.
pub trait SetClassifier<R: Real> {
    /// Short architecture tag stored in checkpoints.
    fn variant(&self) -> &'static str;
    /// Full architecture config as JSON for checkpoints and manifests.
    fn config_value(&self) -> Result<serde_json::Value>;
    fn grid(&self) -> (usize, usize);
    fn set_size(&self) -> usize;
    fn params(&self) -> &ParamSet<R>;
    fn params_mut(&mut self) -> &mut ParamSet<R>;
    /// Builds the forward graph for one set `x: [N, N_r, N_c]` on `tape`.
    fn forward_set(
        &self,
        tape: &mut Tape<R>,
        x: &Tensor<R>,
        mode: ForwardMode<'_>,
    ) -> Result<ForwardOutput<R>>;
    /// Folds training-mode batch statistics into running buffers (no-op for
    /// architectures without them).
    fn apply_batch_stats(&mut self, stats: &[BatchStats<R>], momentum: f64) -> Result<()> {
        let _ = (stats, momentum);
        Ok(())
    }
}

/// Prediction for one set in its original element order.
#[derive(Debug, Clone)]
pub struct Prediction<R: Real> {
    pub confidence: R,
    /// Per-snapshot pooling scores aligned with the input order, when the
    /// architecture exposes them.
    pub scores: Option<Vec<R>>,
}

/// Evaluates one set reproducibly: elements are taken in canonical
/// (lexicographic) order so the same multiset of snapshots yields the same
/// bits regardless of input permutation, and per-element scores are mapped
/// back to the caller's order.
pub fn predict_set<R: Real, M: SetClassifier<R> + ?Sized>(
    model: &M,
    set: &[Snapshot],
) -> Result<Prediction<R>> {
    let order = canonical_order(set);
    let sorted = reorder(set, &order);
    let x = set_to_tensor::<R>(&sorted)?;
    let mut tape = Tape::new();
    let out = model.forward_set(&mut tape, &x, ForwardMode::Eval)?;
    let confidence = tape.value(out.confidence).scalar();
    if !confidence.is_finite() {
        return Err(Error::NonFinite("prediction".into()));
    }
    // Pooling scores are per-snapshot only when the encoder preserves element
    // identity (one score per input element). Architectures that reduce the
    // set before pooling score mixtures instead, which have no per-snapshot
    // reading, so those are not surfaced.
    let scores = match out.scores {
        Some(s) if tape.value(s).len() == set.len() => {
            Some(restore_order(tape.value(s).data(), &order))
        }
        _ => None,
    };
    Ok(Prediction { confidence, scores })
}

/// Accumulates the tape's parameter gradients (after `backward`) into `buf`.
pub fn collect_grads<R: Real>(
    tape: &Tape<R>,
    out: &ForwardOutput<R>,
    buf: &mut GradBuffer<R>,
) -> Result<()> {
    for (i, var) in out.param_vars.iter().enumerate() {
        if let Some(v) = var {
            if let Some(g) = tape.grad(*v) {
                buf.accumulate(i, g)?;
            }
        }
    }
    Ok(())
}
