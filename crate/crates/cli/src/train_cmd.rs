//! `train`: builds the configured model variant, splits each input file into
//! train/validation pools, runs the epoch loop, and writes the best
//! checkpoint plus the metric history.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use snapset_core::baselines::{PoolingOnly, SumMlp};
use snapset_core::data::format::write_snapshots;
use snapset_core::model::checkpoint::save_checkpoint;
use snapset_core::model::{SetAttentionClassifier, SetClassifier};
use snapset_core::seeds::stream;
use snapset_core::train::{fit, FitResult, LabeledPool, TrainConfig};
use snapset_core::{Error, Real, Result};

use crate::config::{Resolved, TrainCmdConfig, Variant};
use crate::model_io::{check_geometry, read_pool, write_csv, write_json};

/// One input file's train/validation split, before set partitioning.
struct SplitPool {
    train: LabeledPool,
    val: LabeledPool,
    stem: String,
    source_meta: serde_json::Value,
}

fn split_pools(
    files: &[PathBuf],
    label: u8,
    val_fraction: f64,
    grid: (usize, usize),
    seed: u64,
) -> Result<Vec<SplitPool>> {
    let mut out = Vec::new();
    for (i, path) in files.iter().enumerate() {
        let pool = read_pool(path)?;
        check_geometry(&pool, grid, path)?;
        let n = pool.snapshots.len();
        let val_count = ((n as f64) * val_fraction).round() as usize;
        if val_count == 0 || val_count >= n {
            return Err(Error::Config(format!(
                "val_fraction {val_fraction} leaves no usable split of {n} snapshots in {}",
                path.display()
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream(seed, &format!("split-{label}-{i}")));
        let val: Vec<_> = order[..val_count].iter().map(|&j| pool.snapshots[j].clone()).collect();
        let train: Vec<_> = order[val_count..].iter().map(|&j| pool.snapshots[j].clone()).collect();
        out.push(SplitPool {
            train: LabeledPool::new(train, label)?,
            val: LabeledPool::new(val, label)?,
            stem: pool.stem,
            source_meta: pool.meta,
        });
    }
    Ok(out)
}

/// The grid every input snapshot must match, from whichever architecture
/// block the variant uses.
fn variant_grid(config: &TrainCmdConfig) -> Result<(usize, usize)> {
    match config.variant {
        Variant::Quan => config
            .model
            .as_ref()
            .map(|m| m.grid)
            .ok_or_else(|| Error::Config("variant quan requires a [train.model] block".into())),
        Variant::Smlp => config
            .smlp
            .as_ref()
            .map(|m| m.grid)
            .ok_or_else(|| Error::Config("variant smlp requires a [train.smlp] block".into())),
        Variant::PabOnly => config
            .pab_only
            .as_ref()
            .map(|m| m.grid)
            .ok_or_else(|| Error::Config("variant pab_only requires a [train.pab_only] block".into())),
    }
}

fn run_fit<R: Real, M: SetClassifier<R>>(
    model: &mut M,
    train: &[LabeledPool],
    val: &[LabeledPool],
    optim: &TrainConfig,
) -> Result<(FitResult<R>, serde_json::Value, &'static str)> {
    let result = fit(model, train, val, optim)?;
    let config_value = model.config_value()?;
    Ok((result, config_value, model.variant()))
}

pub fn run<R: Real>(config: &TrainCmdConfig, resolved: &Resolved) -> Result<()> {
    if config.label0.is_empty() || config.label1.is_empty() {
        return Err(Error::Config("label0 and label1 must each name at least one file".into()));
    }
    if !(config.val_fraction > 0.0 && config.val_fraction < 1.0) {
        return Err(Error::Config("val_fraction must lie strictly between 0 and 1".into()));
    }
    let grid = variant_grid(config)?;
    let mut optim = config.optim.clone();
    optim.seed = resolved.seed;
    optim.validate()?;

    let mut splits = split_pools(&config.label0, 0, config.val_fraction, grid, resolved.seed)?;
    splits.extend(split_pools(&config.label1, 1, config.val_fraction, grid, resolved.seed)?);
    let train_pools: Vec<LabeledPool> = splits.iter().map(|s| s.train.clone()).collect();
    let val_pools: Vec<LabeledPool> = splits.iter().map(|s| s.val.clone()).collect();

    let (result, model_config, variant) = match config.variant {
        Variant::Quan => {
            let mc = config.model.clone().expect("checked by variant_grid");
            let mut model = SetAttentionClassifier::<R>::new(mc, optim.init, resolved.seed)?;
            run_fit(&mut model, &train_pools, &val_pools, &optim)?
        }
        Variant::Smlp => {
            let mc = config.smlp.clone().expect("checked by variant_grid");
            let mut model = SumMlp::<R>::new(mc, optim.init, resolved.seed)?;
            run_fit(&mut model, &train_pools, &val_pools, &optim)?
        }
        Variant::PabOnly => {
            let pc = config.pab_only.clone().expect("checked by variant_grid");
            let mut model = PoolingOnly::<R>::new(
                pc.grid,
                pc.set_size,
                pc.widths,
                pc.residual_activation,
                optim.init,
                resolved.seed,
            )?;
            run_fit(&mut model, &train_pools, &val_pools, &optim)?
        }
    };

    // The validation pools, frozen to disk in fit's pool order, so later
    // evaluation runs can reproduce the stored validation accuracy exactly.
    for (i, split) in splits.iter().enumerate() {
        let meta = serde_json::json!({
            "source": split.stem,
            "source_meta": split.source_meta,
            "label": split.val.label,
            "split": "val",
            "val_fraction": config.val_fraction,
            "seed": resolved.seed,
        });
        write_snapshots(
            &resolved.out.join(format!("val_pool_{i}.qsnp")),
            &split.val.snapshots,
            &meta,
        )?;
    }

    let extra = serde_json::json!({
        "best_epoch": result.best_epoch,
        "best_val_accuracy": result.best_val_accuracy,
        "optim": serde_json::to_value(&optim).map_err(|e| Error::Format(e.to_string()))?,
        "trainable_parameters": result.best_params.trainable_elements(),
    });
    save_checkpoint(
        &resolved.out.join("checkpoint.qckp"),
        variant,
        &model_config,
        &extra,
        &result.best_params,
    )?;

    let metric_rows: Vec<Vec<String>> = result
        .history
        .iter()
        .map(|r| {
            vec![
                r.epoch.to_string(),
                format!("{:e}", r.lr),
                format!("{}", r.train_loss),
                format!("{}", r.val_accuracy),
            ]
        })
        .collect();
    write_csv(
        &resolved.out.join("metrics.csv"),
        &["epoch", "lr", "train_loss", "val_accuracy"],
        &metric_rows,
    )?;
    let timing_rows: Vec<Vec<String>> = result
        .history
        .iter()
        .map(|r| vec![r.epoch.to_string(), format!("{}", r.wall_seconds)])
        .collect();
    write_csv(&resolved.out.join("timing.csv"), &["epoch", "wall_seconds"], &timing_rows)?;

    write_json(
        &resolved.out.join("train.json"),
        &serde_json::json!({
            "variant": variant,
            "best_epoch": result.best_epoch,
            "best_val_accuracy": result.best_val_accuracy,
            "epochs": result.history.len(),
            "trainable_parameters": result.best_params.trainable_elements(),
            "val_pools": splits.iter().enumerate().map(|(i, s)| {
                serde_json::json!({
                    "path": format!("val_pool_{i}.qsnp"),
                    "source": s.stem,
                    "label": s.val.label,
                })
            }).collect::<Vec<_>>(),
        }),
    )?;
    println!(
        "trained {variant}: best validation accuracy {:.4} at epoch {}",
        result.best_val_accuracy, result.best_epoch
    );
    Ok(())
}

/// Trains with a declared precision.
pub fn run_with_precision(config: &TrainCmdConfig, resolved: &Resolved) -> Result<()> {
    match resolved.precision {
        crate::config::Precision::F32 => run::<f32>(config, resolved),
        crate::config::Precision::F64 => run::<f64>(config, resolved),
    }
}
