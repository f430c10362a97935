//! `report` subcommand: analysis artifacts beyond plain evaluation.
//!
//! Three report kinds share the command:
//!
//! * `xeb` — linear cross-entropy benchmark sweep over circuit depths. The
//!   circuit and shot streams are derived with the same labels the `generate`
//!   command uses, so the report describes exactly the circuits and samples
//!   behind a generated dataset with the same seed.
//! * `attention` — pooling-score interpretation: closed-loop expectations of
//!   the most- vs least-attended snapshots under a trained model.
//! * `sample_complexity` — smallest number of sets whose mean confidence
//!   stays one-sidedly above chance, per dataset.

use snapset_core::analysis::{
    pooling_attention_report, sample_complexity, xeb_estimate, xeb_exact_from_probs,
};
use snapset_core::data::rqc::{self, RqcParams};
use snapset_core::data::Snapshot;
use snapset_core::model::predict_set;
use snapset_core::seeds::{child_seed, stream};
use snapset_core::{Error, Real, Result};

use crate::config::{Precision, ReportConfig, Resolved};
use crate::eval_cmd::file_confidences;
use crate::model_io::{check_geometry, load_model, read_pool, write_csv, write_json};

pub fn run(config: &ReportConfig, resolved: &Resolved) -> Result<()> {
    match config {
        ReportConfig::Xeb { rows, cols, depths, instances, shots, theta_pi, phi_pi } => {
            xeb_report(*rows, *cols, depths, *instances, *shots, *theta_pi, *phi_pi, resolved)
        }
        ReportConfig::Attention { checkpoint, dataset, quantile, min_group } => {
            match resolved.precision {
                Precision::F32 => attention_report::<f32>(
                    checkpoint, dataset, *quantile, *min_group, resolved,
                ),
                Precision::F64 => attention_report::<f64>(
                    checkpoint, dataset, *quantile, *min_group, resolved,
                ),
            }
        }
        ReportConfig::SampleComplexity { checkpoint, datasets, alpha, repetitions } => {
            match resolved.precision {
                Precision::F32 => complexity_report::<f32>(
                    checkpoint, datasets, *alpha, *repetitions, resolved,
                ),
                Precision::F64 => complexity_report::<f64>(
                    checkpoint, datasets, *alpha, *repetitions, resolved,
                ),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn xeb_report(
    rows: usize,
    cols: usize,
    depths: &[usize],
    instances: usize,
    shots: usize,
    theta_pi: f64,
    phi_pi: f64,
    resolved: &Resolved,
) -> Result<()> {
    if depths.is_empty() {
        return Err(Error::config("report.depths must name at least one circuit depth"));
    }
    if instances == 0 || shots == 0 {
        return Err(Error::config("report needs positive instances and shots"));
    }
    let mut csv_rows = Vec::new();
    let mut json_rows = Vec::new();
    for &depth in depths {
        for instance in 0..instances {
            let params = RqcParams {
                rows,
                cols,
                depth,
                theta: theta_pi * std::f64::consts::PI,
                phi: phi_pi * std::f64::consts::PI,
            };
            let circuit_seed =
                child_seed(resolved.seed, &format!("rqc-circuit-d{depth}-i{instance}"));
            let state = rqc::simulate(&params, circuit_seed)?;
            let probs = rqc::born_probabilities(&state)?;
            let exact = xeb_exact_from_probs(&probs)?;

            let mut shot_rng =
                stream(resolved.seed, &format!("rqc-shots-d{depth}-i{instance}"));
            let samples = rqc::sample_bitstrings(&state, (rows, cols), shots, &mut shot_rng)?;
            let indices: Vec<u64> = samples.iter().map(rqc::snapshot_to_index).collect();
            let est = xeb_estimate(&indices, &probs)?;

            csv_rows.push(vec![
                depth.to_string(),
                instance.to_string(),
                format!("{exact}"),
                format!("{}", est.value),
                format!("{}", est.stderr),
                est.samples.to_string(),
            ]);
            json_rows.push(serde_json::json!({
                "depth": depth,
                "instance": instance,
                "exact_xeb": exact,
                "estimated_xeb": est.value,
                "stderr": est.stderr,
                "shots": est.samples,
            }));
        }
    }
    write_csv(
        &resolved.out.join("xeb.csv"),
        &["depth", "instance", "exact_xeb", "estimated_xeb", "stderr", "shots"],
        &csv_rows,
    )?;
    write_json(
        &resolved.out.join("xeb.json"),
        &serde_json::json!({
            "rows": rows,
            "cols": cols,
            "theta_pi": theta_pi,
            "phi_pi": phi_pi,
            "seed": resolved.seed,
            "circuits": json_rows,
        }),
    )?;
    println!("report: xeb over {} circuit(s) written", csv_rows.len());
    Ok(())
}

/// Scores the whole dataset set by set (sequential chunks, file order) and
/// pools every snapshot's attention score into one report. Per-set scores
/// each sum to 1, so the concatenation is renormalized by the set count.
fn attention_report<R: Real>(
    checkpoint: &std::path::Path,
    dataset: &std::path::Path,
    quantile: f64,
    min_group: usize,
    resolved: &Resolved,
) -> Result<()> {
    let model = load_model::<R>(checkpoint)?;
    let pool = read_pool(dataset)?;
    check_geometry(&pool, model.grid(), dataset)?;
    let set_size = model.set_size();
    if pool.snapshots.len() < set_size {
        return Err(Error::config(format!(
            "{}: {} snapshots cannot fill one set of {set_size}",
            dataset.display(),
            pool.snapshots.len()
        )));
    }

    let mut windows: Vec<Snapshot> = Vec::new();
    let mut scores: Vec<f64> = Vec::new();
    let chunks: Vec<&[Snapshot]> = pool.snapshots.chunks_exact(set_size).collect();
    for chunk in &chunks {
        let pred = predict_set(model.as_ref(), chunk)?;
        let set_scores = pred.scores.ok_or_else(|| {
            Error::config(
                "this architecture does not expose per-snapshot pooling scores \
                 (the encoder merges snapshots before pooling)",
            )
        })?;
        windows.extend_from_slice(chunk);
        scores.extend(set_scores.iter().map(|&s| Real::to_f64(s) / chunks.len() as f64));
    }

    let report = pooling_attention_report(&windows, &scores, quantile, min_group)?;
    let mut csv_rows = Vec::new();
    for (group, stats) in [("high", &report.high), ("low", &report.low)] {
        for s in stats.iter() {
            csv_rows.push(vec![
                group.to_string(),
                s.side.to_string(),
                s.perimeter.to_string(),
                format!("{}", s.mean),
                format!("{}", s.stderr),
                s.samples.to_string(),
            ]);
        }
    }
    write_csv(
        &resolved.out.join("attention.csv"),
        &["group", "side", "perimeter", "mean_loop", "stderr", "samples"],
        &csv_rows,
    )?;
    write_json(
        &resolved.out.join("attention.json"),
        &serde_json::json!({
            "checkpoint": checkpoint.display().to_string(),
            "dataset": pool.stem,
            "sets": chunks.len(),
            "snapshots": windows.len(),
            "report": report,
        }),
    )?;
    println!(
        "report: attention over {} snapshot(s) in {} set(s), group size {}",
        windows.len(),
        chunks.len(),
        report.group_size,
    );
    Ok(())
}

fn complexity_report<R: Real>(
    checkpoint: &std::path::Path,
    datasets: &[std::path::PathBuf],
    alpha: f64,
    repetitions: usize,
    resolved: &Resolved,
) -> Result<()> {
    if datasets.is_empty() {
        return Err(Error::config("report.datasets must name at least one snapshot file"));
    }
    let model = load_model::<R>(checkpoint)?;
    let (n_r, n_c) = model.grid();
    let cells = n_r * n_c;
    let set_size = model.set_size();

    let mut csv_rows = Vec::new();
    let mut json_rows = Vec::new();
    for (i, path) in datasets.iter().enumerate() {
        let confidences =
            file_confidences(model.as_ref(), path, resolved.seed, "val-partition", i)?;
        let mut rng = stream(resolved.seed, &format!("sample-complexity-{i}"));
        let sc = sample_complexity(&confidences, set_size, cells, repetitions, alpha, &mut rng)?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        csv_rows.push(vec![
            stem.clone(),
            confidences.len().to_string(),
            sc.d_star.len().to_string(),
            sc.repetitions.to_string(),
            sc.mean_cost.map(|c| format!("{c}")).unwrap_or_default(),
            sc.stderr_cost.map(|c| format!("{c}")).unwrap_or_default(),
        ]);
        json_rows.push(serde_json::json!({
            "dataset": stem,
            "sets": confidences.len(),
            "d_star": sc.d_star,
            "defined": sc.d_star.len(),
            "repetitions": sc.repetitions,
            "mean_cost": sc.mean_cost,
            "stderr_cost": sc.stderr_cost,
        }));
    }
    write_csv(
        &resolved.out.join("complexity.csv"),
        &["dataset", "sets", "defined", "repetitions", "mean_cost", "stderr_cost"],
        &csv_rows,
    )?;
    write_json(
        &resolved.out.join("complexity.json"),
        &serde_json::json!({
            "checkpoint": checkpoint.display().to_string(),
            "alpha": alpha,
            "set_size": set_size,
            "cells_per_snapshot": cells,
            "seed": resolved.seed,
            "datasets": json_rows,
        }),
    )?;
    println!("report: sample complexity over {} dataset(s) written", csv_rows.len());
    Ok(())
}
