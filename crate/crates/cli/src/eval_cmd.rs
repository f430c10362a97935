//! `eval` subcommand: scores snapshot files with a trained checkpoint.
//!
//! Each dataset file is partitioned into sets by a seeded stream and every
//! set is scored with [`predict_set`]. Pointing the command at a training
//! run's validation pool files with that run's seed (and the default
//! partition label) rebuilds the exact validation sets, so the reported
//! accuracy reproduces the stored best validation accuracy bit for bit.

use std::path::Path;

use snapset_core::analysis::{accuracy, crossing_point, mean_stderr};
use snapset_core::data::sets::partition_into_sets;
use snapset_core::data::Snapshot;
use snapset_core::model::predict_set;
use snapset_core::seeds::stream;
use snapset_core::{Error, Real, Result};

use crate::config::{EvalConfig, Precision, Resolved};
use crate::model_io::{check_geometry, load_model, read_pool, write_csv, write_json};

/// One dataset's summary row.
struct EvalRow {
    dataset: String,
    x: Option<f64>,
    sets: usize,
    mean_confidence: f64,
    stderr: f64,
    accuracy: Option<f64>,
}

fn validate(config: &EvalConfig) -> Result<()> {
    if config.datasets.is_empty() {
        return Err(Error::config("eval.datasets must name at least one snapshot file"));
    }
    if let Some(labels) = &config.labels {
        if labels.len() != config.datasets.len() {
            return Err(Error::config(format!(
                "eval.labels has {} entries for {} datasets",
                labels.len(),
                config.datasets.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::config(format!("eval.labels must be 0 or 1, got {bad}")));
        }
    }
    if let Some(xs) = &config.xs {
        if xs.len() != config.datasets.len() {
            return Err(Error::config(format!(
                "eval.xs has {} entries for {} datasets",
                xs.len(),
                config.datasets.len()
            )));
        }
    }
    if !(0.0..=1.0).contains(&config.crossing_level) {
        return Err(Error::config(format!(
            "eval.crossing_level must lie in [0, 1], got {}",
            config.crossing_level
        )));
    }
    Ok(())
}

fn run<R: Real>(config: &EvalConfig, resolved: &Resolved) -> Result<()> {
    validate(config)?;
    let model = load_model::<R>(&config.checkpoint)?;
    let set_size = model.set_size();

    let mut rows = Vec::with_capacity(config.datasets.len());
    for (i, path) in config.datasets.iter().enumerate() {
        let pool = read_pool(path)?;
        check_geometry(&pool, model.grid(), path)?;
        let mut rng = stream(resolved.seed, &format!("{}-pool-{i}", config.partition_label));
        let sets = partition_into_sets(pool.snapshots.len(), set_size, &mut rng)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;

        let mut confidences = Vec::with_capacity(sets.len());
        for indices in &sets {
            let set: Vec<Snapshot> =
                indices.iter().map(|&j| pool.snapshots[j].clone()).collect();
            let pred = predict_set(model.as_ref(), &set)?;
            confidences.push(pred.confidence.to_f64());
        }

        let (mean_confidence, stderr) = mean_stderr(&confidences)?;
        let acc = config
            .labels
            .as_ref()
            .map(|labels| {
                let scored: Vec<(f64, u8)> =
                    confidences.iter().map(|&c| (c, labels[i])).collect();
                accuracy(&scored, 0.5)
            })
            .transpose()?;
        rows.push(EvalRow {
            dataset: pool.stem,
            x: config.xs.as_ref().map(|xs| xs[i]),
            sets: sets.len(),
            mean_confidence,
            stderr,
            accuracy: acc,
        });
    }

    write_outputs(config, resolved, &rows)
}

fn write_outputs(config: &EvalConfig, resolved: &Resolved, rows: &[EvalRow]) -> Result<()> {
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.dataset.clone(),
                r.x.map(|x| format!("{x}")).unwrap_or_default(),
                r.sets.to_string(),
                format!("{}", r.mean_confidence),
                format!("{}", r.stderr),
                r.accuracy.map(|a| format!("{a}")).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(
        &resolved.out.join("eval.csv"),
        &["dataset", "x", "sets", "mean_confidence", "stderr", "accuracy"],
        &csv_rows,
    )?;

    let crossing = match &config.xs {
        Some(xs) => {
            let means: Vec<f64> = rows.iter().map(|r| r.mean_confidence).collect();
            crossing_point(xs, &means, config.crossing_level)?
        }
        None => None,
    };
    let json_rows: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "dataset": r.dataset,
                "x": r.x,
                "sets": r.sets,
                "mean_confidence": r.mean_confidence,
                "stderr": r.stderr,
                "accuracy": r.accuracy,
            })
        })
        .collect();
    let summary = serde_json::json!({
        "checkpoint": config.checkpoint.display().to_string(),
        "partition_label": config.partition_label,
        "seed": resolved.seed,
        "crossing_level": config.crossing_level,
        "crossing": crossing,
        "datasets": json_rows,
    });
    write_json(&resolved.out.join("eval.json"), &summary)?;

    let acc_note = rows
        .iter()
        .filter_map(|r| r.accuracy)
        .reduce(f64::min)
        .map(|a| format!(", min accuracy {a:.4}"))
        .unwrap_or_default();
    println!(
        "eval: {} dataset(s), {} set(s) scored{}{}",
        rows.len(),
        rows.iter().map(|r| r.sets).sum::<usize>(),
        acc_note,
        crossing
            .map(|c| format!(", confidence crosses {} at {c:.6}", config.crossing_level))
            .unwrap_or_default(),
    );
    Ok(())
}

/// Evaluates with a declared precision.
pub fn run_with_precision(config: &EvalConfig, resolved: &Resolved) -> Result<()> {
    match resolved.precision {
        Precision::F32 => run::<f32>(config, resolved),
        Precision::F64 => run::<f64>(config, resolved),
    }
}

/// Scores every complete set in one file and returns per-set confidences in
/// partition order. Shared with the `report` subcommand, which needs raw
/// confidences rather than summaries.
pub fn file_confidences<R: Real>(
    model: &dyn snapset_core::model::SetClassifier<R>,
    path: &Path,
    seed: u64,
    partition_label: &str,
    index: usize,
) -> Result<Vec<f64>> {
    let pool = read_pool(path)?;
    check_geometry(&pool, model.grid(), path)?;
    let mut rng = stream(seed, &format!("{partition_label}-pool-{index}"));
    let sets = partition_into_sets(pool.snapshots.len(), model.set_size(), &mut rng)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let mut confidences = Vec::with_capacity(sets.len());
    for indices in &sets {
        let set: Vec<Snapshot> = indices.iter().map(|&j| pool.snapshots[j].clone()).collect();
        confidences.push(predict_set(model, &set)?.confidence.to_f64());
    }
    Ok(confidences)
}
