//! Supervised training: optimizer, schedule, initialization, loss, and the
//! epoch loop with periodic set reshuffling and best-checkpoint selection.

pub mod adam;
pub mod init;
pub mod loss;
pub mod schedule;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use init::Init;
pub use loss::bce_loss;
pub use schedule::StepLr;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::accuracy;
use crate::data::sets::partition_into_sets;
use crate::data::snapshot::{set_to_tensor, Snapshot};
use crate::error::{Error, Result};
use crate::model::{predict_set, ForwardMode, SetClassifier};
use crate::real::Real;
use crate::seeds::stream;
use crate::tensor::{GradBuffer, ParamSet, Tape};

/// Hyperparameters of one training run. The numeric precision is carried by
/// the model's scalar type, not stored here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    #[serde(default)]
    pub adam: AdamConfig,
    /// Learning-rate decay; the default applies no decay.
    #[serde(default)]
    pub schedule: StepLr,
    pub epochs: usize,
    /// Training pools are repartitioned into sets every this many epochs.
    #[serde(default = "default_shuffle_period")]
    pub shuffle_period: usize,
    /// Sets per minibatch (snapshots per batch divided by the set size).
    pub batch_sets: usize,
    /// Weight initialization scheme; used by the caller when constructing the
    /// model, recorded here so a run's manifest is self-describing.
    #[serde(default = "default_init")]
    pub init: Init,
    #[serde(default)]
    pub seed: u64,
    /// Momentum of the running batch-norm statistics update.
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
}

fn default_shuffle_period() -> usize {
    10
}

fn default_init() -> Init {
    Init::UniformFanIn
}

fn default_bn_momentum() -> f64 {
    0.1
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.adam.validate()?;
        self.schedule.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive and finite"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.shuffle_period == 0 {
            return Err(Error::config("shuffle period must be at least 1"));
        }
        if self.batch_sets == 0 {
            return Err(Error::config("batch size must be at least 1 set"));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::config("batch-norm momentum must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// A pool of interchangeable snapshots sharing one class label. Training
/// draws its sets by partitioning each pool.
#[derive(Debug, Clone)]
pub struct LabeledPool {
    pub snapshots: Vec<Snapshot>,
    pub label: u8,
}

impl LabeledPool {
    pub fn new(snapshots: Vec<Snapshot>, label: u8) -> Result<Self> {
        if label > 1 {
            return Err(Error::config(format!("label {label} outside {{0, 1}}")));
        }
        if snapshots.is_empty() {
            return Err(Error::config("a labeled pool cannot be empty"));
        }
        Ok(LabeledPool { snapshots, label })
    }
}

/// One epoch's row of the metric history. `wall_seconds` is measurement, not
/// arithmetic: everything else is bit-reproducible for a fixed seed, the wall
/// time never is, so emitters keep the two apart.
#[derive(Debug, Clone, Serialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub wall_seconds: f64,
}

/// Weights of the best validation epoch seen, plus the full history.
#[derive(Debug, Clone)]
pub struct FitResult<R: Real> {
    pub best_params: ParamSet<R>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub history: Vec<MetricRecord>,
}

/// One class pool partitioned into fixed sets of indices.
struct SetBatch {
    pool: usize,
    indices: Vec<usize>,
}

fn partition_pools(
    pools: &[LabeledPool],
    set_size: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<SetBatch>> {
    let mut out = Vec::new();
    for (pi, pool) in pools.iter().enumerate() {
        let mut rng = stream(seed, &format!("{label}-pool-{pi}"));
        for indices in partition_into_sets(pool.snapshots.len(), set_size, &mut rng)? {
            out.push(SetBatch { pool: pi, indices });
        }
    }
    if out.is_empty() {
        return Err(Error::config("no complete sets could be formed"));
    }
    Ok(out)
}

fn gather_set(pools: &[LabeledPool], set: &SetBatch) -> Vec<Snapshot> {
    set.indices.iter().map(|&i| pools[set.pool].snapshots[i].clone()).collect()
}

/// Trains `model` on `train` and selects the epoch with the highest accuracy
/// on `val`. The validation pools are partitioned into sets once up front and
/// held fixed; the training pools are repartitioned every
/// `config.shuffle_period` epochs from the seeded stream. Each minibatch sums
/// per-set gradients scaled by `1/batch` and applies one Adam step; batch
/// statistics from normalization layers are folded into the model's running
/// buffers after the step.
///
/// Everything except the recorded wall time is a pure function of
/// (model initial weights, data, config.seed).
pub fn fit<R: Real, M: SetClassifier<R>>(
    model: &mut M,
    train: &[LabeledPool],
    val: &[LabeledPool],
    config: &TrainConfig,
) -> Result<FitResult<R>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::config("training split is empty"));
    }
    if val.is_empty() {
        return Err(Error::config("validation split is empty"));
    }
    let set_size = model.set_size();
    let val_sets = partition_pools(val, set_size, config.seed, "val-partition")?;

    let mut train_sets: Vec<SetBatch> = Vec::new();
    let mut best_params = model.params().clone();
    let mut best_epoch = 0usize;
    let mut best_val_accuracy = f64::NEG_INFINITY;
    let mut history = Vec::with_capacity(config.epochs);
    let mut adam_state = AdamState::new(model.params());
    let mut grads = GradBuffer::zeros_like(model.params());

    for epoch in 0..config.epochs {
        let started = Instant::now();
        if epoch % config.shuffle_period == 0 {
            train_sets =
                partition_pools(train, set_size, config.seed, &format!("train-partition-{epoch}"))?;
        }
        let order = {
            let mut idx: Vec<usize> = (0..train_sets.len()).collect();
            use rand::seq::SliceRandom;
            idx.shuffle(&mut stream(config.seed, &format!("train-order-{epoch}")));
            idx
        };
        let lr = config.schedule.lr_at(config.learning_rate, epoch);

        let mut epoch_loss = 0.0f64;
        for (bi, batch) in order.chunks(config.batch_sets).enumerate() {
            grads.clear();
            let mut batch_stats = Vec::new();
            let inv_batch = R::from_f64(1.0 / batch.len() as f64);
            for (si, &set_idx) in batch.iter().enumerate() {
                let set = &train_sets[set_idx];
                let snapshots = gather_set(train, set);
                let x = set_to_tensor::<R>(&snapshots)?;
                let mut tape = Tape::new();
                let mut plan_rng =
                    stream(config.seed, &format!("plan-{epoch}-{bi}-{si}"));
                let out = model.forward_set(
                    &mut tape,
                    &x,
                    ForwardMode::Train { plan_rng: &mut plan_rng },
                )?;
                let label = R::from_f64(train[set.pool].label as f64);
                let loss = tape.bce_mean(out.confidence, &[label])?;
                let loss_value = tape.value(loss).scalar().to_f64();
                if !loss_value.is_finite() {
                    return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
                }
                epoch_loss += loss_value;
                let scaled = tape.scale(loss, inv_batch);
                tape.backward(scaled)?;
                crate::model::collect_grads(&tape, &out, &mut grads)?;
                if let Some(stats) = out.batch_stats {
                    batch_stats.push(stats);
                }
            }
            adam_step(model.params_mut(), &grads, &mut adam_state, &config.adam, lr)
                .map_err(|e| match e {
                    Error::NonFinite(what) => {
                        Error::NonFinite(format!("{what} (epoch {epoch})"))
                    }
                    other => other,
                })?;
            model.apply_batch_stats(&batch_stats, config.bn_momentum)?;
        }
        let train_loss = epoch_loss / train_sets.len() as f64;

        let mut scored = Vec::with_capacity(val_sets.len());
        for set in &val_sets {
            let snapshots = gather_set(val, set);
            let pred = predict_set(model, &snapshots)?;
            scored.push((pred.confidence.to_f64(), val[set.pool].label));
        }
        let val_accuracy = accuracy(&scored, 0.5)?;

        if val_accuracy > best_val_accuracy {
            best_val_accuracy = val_accuracy;
            best_epoch = epoch;
            best_params = model.params().clone();
        }
        history.push(MetricRecord {
            epoch,
            lr,
            train_loss,
            val_accuracy,
            wall_seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok(FitResult { best_params, best_epoch, best_val_accuracy, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::{Activation, FrontEnd, ModelConfig};
    use crate::model::SetAttentionClassifier;

    /// Class 0: all-zero snapshots. Class 1: all-one snapshots. Any working
    /// model separates these immediately.
    fn delta_pools(per_class: usize) -> (Vec<LabeledPool>, Vec<LabeledPool>) {
        let zeros: Vec<Snapshot> =
            (0..per_class).map(|_| Snapshot::new(2, 2, vec![0, 0, 0, 0]).unwrap()).collect();
        let ones: Vec<Snapshot> =
            (0..per_class).map(|_| Snapshot::new(2, 2, vec![1, 1, 1, 1]).unwrap()).collect();
        let train = vec![
            LabeledPool::new(zeros.clone(), 0).unwrap(),
            LabeledPool::new(ones.clone(), 1).unwrap(),
        ];
        let val = vec![
            LabeledPool::new(zeros[..per_class / 2].to_vec(), 0).unwrap(),
            LabeledPool::new(ones[..per_class / 2].to_vec(), 1).unwrap(),
        ];
        (train, val)
    }

    fn tiny_model(seed: u64) -> SetAttentionClassifier<f64> {
        let config = ModelConfig {
            grid: (2, 2),
            set_size: 4,
            mini_sets: 1,
            layers: 1,
            d_h: 4,
            n_heads: 2,
            front_end: FrontEnd::Flatten,
            residual_activation: Activation::Sigmoid,
        };
        SetAttentionClassifier::new(config, Init::XavierNormal, seed).unwrap()
    }

    fn quick_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            learning_rate: 0.01,
            adam: AdamConfig { l2: 0.0, ..AdamConfig::default() },
            schedule: StepLr { step_size: 1000, gamma: 1.0 },
            epochs,
            shuffle_period: 10,
            batch_sets: 4,
            init: Init::XavierNormal,
            seed: 7,
            bn_momentum: 0.1,
        }
    }

    #[test]
    fn separable_deltas_reach_full_accuracy() {
        let (train, val) = delta_pools(32);
        let mut model = tiny_model(3);
        let result = fit(&mut model, &train, &val, &quick_config(50)).unwrap();
        assert_eq!(
            result.best_val_accuracy, 1.0,
            "best accuracy {} at epoch {}",
            result.best_val_accuracy, result.best_epoch
        );
        // The best-checkpoint invariant: recorded best equals the history max.
        let max_acc =
            result.history.iter().map(|r| r.val_accuracy).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(result.best_val_accuracy, max_acc);
        assert_eq!(result.history.len(), 50);
    }

    #[test]
    fn loss_decreases_over_first_steps_on_separable_data() {
        // One biggish batch per epoch so each epoch is one Adam step; the
        // loss must strictly decrease over the first 5 steps for every seed.
        let (train, val) = delta_pools(16);
        for seed in 0..5u64 {
            let mut model = tiny_model(seed);
            let mut config = quick_config(5);
            config.batch_sets = 8;
            config.seed = seed;
            let result = fit(&mut model, &train, &val, &config).unwrap();
            let losses: Vec<f64> = result.history.iter().map(|r| r.train_loss).collect();
            for w in losses.windows(2) {
                assert!(w[1] < w[0], "seed {seed}: loss did not decrease: {losses:?}");
            }
        }
    }

    #[test]
    fn permuted_labels_hover_at_chance() {
        // Same snapshot distribution under both labels: there is nothing to
        // learn, so validation accuracy stays near 1/2 (both classes are
        // i.i.d. fair coins).
        let mut rng = stream(11, "chance-data");
        use rand::Rng;
        let mut draw = |n: usize| -> Vec<Snapshot> {
            (0..n)
                .map(|_| {
                    Snapshot::from_fn(2, 2, |_, _| u8::from(rng.gen_bool(0.5))).unwrap()
                })
                .collect()
        };
        let train = vec![
            LabeledPool::new(draw(64), 0).unwrap(),
            LabeledPool::new(draw(64), 1).unwrap(),
        ];
        let val = vec![
            LabeledPool::new(draw(64), 0).unwrap(),
            LabeledPool::new(draw(64), 1).unwrap(),
        ];
        let mut model = tiny_model(5);
        let mut config = quick_config(20);
        config.learning_rate = 1e-3;
        let result = fit(&mut model, &train, &val, &config).unwrap();
        let last = result.history.last().unwrap().val_accuracy;
        assert!((0.25..=0.75).contains(&last), "accuracy {last} is suspiciously far from chance");
    }

    #[test]
    fn fit_is_bit_reproducible() {
        let (train, val) = delta_pools(16);
        let run = || {
            let mut model = tiny_model(9);
            fit(&mut model, &train, &val, &quick_config(7)).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.best_epoch, b.best_epoch);
        assert_eq!(a.best_val_accuracy.to_bits(), b.best_val_accuracy.to_bits());
        for (ra, rb) in a.history.iter().zip(&b.history) {
            assert_eq!(ra.train_loss.to_bits(), rb.train_loss.to_bits());
            assert_eq!(ra.val_accuracy.to_bits(), rb.val_accuracy.to_bits());
        }
        for (pa, pb) in a.best_params.iter().zip(b.best_params.iter()) {
            assert_eq!(pa.name, pb.name);
            for (x, y) in pa.value.data().iter().zip(pb.value.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn partitions_change_only_at_the_shuffle_period() {
        // Observed indirectly: the partition streams are keyed by the epoch
        // at which they are drawn, so epochs 0–9 share one partition and
        // epoch 10 draws another.
        let pools = vec![LabeledPool::new(
            (0..32)
                .map(|i| {
                    Snapshot::from_fn(2, 2, |r, c| ((i >> (r * 2 + c)) & 1) as u8).unwrap()
                })
                .collect(),
            0,
        )
        .unwrap()];
        let at = |epoch: usize| {
            partition_pools(&pools, 4, 7, &format!("train-partition-{epoch}"))
                .unwrap()
                .iter()
                .map(|s| s.indices.clone())
                .collect::<Vec<_>>()
        };
        assert_eq!(at(0), at(0));
        assert_ne!(at(0), at(10));
    }

    #[test]
    fn empty_splits_are_rejected() {
        let (train, _) = delta_pools(8);
        let mut model = tiny_model(1);
        assert!(fit(&mut model, &train, &[], &quick_config(1)).is_err());
        assert!(fit(&mut model, &[], &train, &quick_config(1)).is_err());
        // Pools smaller than one set cannot form a partition.
        let small = vec![LabeledPool::new(
            vec![Snapshot::new(2, 2, vec![0, 0, 0, 0]).unwrap()],
            0,
        )
        .unwrap()];
        assert!(fit(&mut model, &small, &small, &quick_config(1)).is_err());
    }
}
