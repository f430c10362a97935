//! Interpretation of the pooling attention: do highly attended snapshots
//! carry different closed-loop expectations than weakly attended ones?
//!
//! Snapshots here are plaquette-valued windows (bit 1 = plaquette `−1`).
//! The product of the plaquettes inside an axis-aligned `L×L` square equals
//! the Z product around the square's perimeter loop (length `4L`), so the
//! per-group loop expectation `⟨Z_closed⟩` is estimated by averaging that
//! `±1` block product over every placement of the square fully inside each
//! window of the group — windows are open crops, no wrap-around.

use serde::Serialize;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};

/// Mean `±1` product over square loops of one side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LoopStat {
    /// Square side in plaquettes.
    pub side: usize,
    /// Loop perimeter `4·side`.
    pub perimeter: usize,
    pub mean: f64,
    pub stderr: f64,
    /// Number of (window, placement) samples behind the mean.
    pub samples: usize,
}

/// High- and low-attention loop expectations for one evaluated set.
#[derive(Debug, Clone, Serialize)]
pub struct AttentionReport {
    pub quantile: f64,
    pub group_size: usize,
    /// Loop statistics of the most-attended windows, one entry per side.
    pub high: Vec<LoopStat>,
    /// Loop statistics of the least-attended windows.
    pub low: Vec<LoopStat>,
}

/// Loop expectation over all placements of an `side × side` square inside
/// each window. All windows must share a geometry that fits the square.
pub fn loop_stats(windows: &[&Snapshot], side: usize) -> Result<LoopStat> {
    let first = windows
        .first()
        .ok_or_else(|| Error::config("loop statistics need at least one window"))?;
    let (rows, cols) = (first.rows(), first.cols());
    if side == 0 || side > rows.min(cols) {
        return Err(Error::shape(
            "loop_stats",
            format!("side {side} does not fit a {rows}×{cols} window"),
        ));
    }
    let mut values = Vec::with_capacity(windows.len() * (rows - side + 1) * (cols - side + 1));
    for w in windows {
        if w.rows() != rows || w.cols() != cols {
            return Err(Error::shape(
                "loop_stats",
                format!("mixed window geometries {rows}×{cols} and {}×{}", w.rows(), w.cols()),
            ));
        }
        for r0 in 0..=rows - side {
            for c0 in 0..=cols - side {
                let mut parity = 0u8;
                for r in r0..r0 + side {
                    for c in c0..c0 + side {
                        parity ^= w.get(r, c);
                    }
                }
                values.push(if parity == 0 { 1.0 } else { -1.0 });
            }
        }
    }
    let (mean, stderr) = crate::analysis::stats::mean_stderr(&values)?;
    Ok(LoopStat { side, perimeter: 4 * side, mean, stderr, samples: values.len() })
}

/// Splits set indices into disjoint top and bottom attention groups of size
/// `max(round(quantile·n), min_group)` each (descending score order, ties
/// broken by index).
pub fn quantile_groups(
    scores: &[f64],
    quantile: f64,
    min_group: usize,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=0.5).contains(&quantile) || quantile == 0.0 {
        return Err(Error::config(format!("quantile must lie in (0, 0.5], got {quantile}")));
    }
    let n = scores.len();
    let g = ((quantile * n as f64).round() as usize).max(min_group.max(1));
    if 2 * g > n {
        return Err(Error::config(format!(
            "set of {n} snapshots is too small for two disjoint groups of {g}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    let high = order[..g].to_vec();
    let low = order[n - g..].to_vec();
    Ok((high, low))
}

/// Builds the high/low attention report for one set of plaquette windows
/// and its pooling scores, over square loops up to side `min(6, window)`.
pub fn pooling_attention_report(
    windows: &[Snapshot],
    scores: &[f64],
    quantile: f64,
    min_group: usize,
) -> Result<AttentionReport> {
    if windows.len() != scores.len() || windows.is_empty() {
        return Err(Error::shape(
            "attention_report",
            format!("{} windows with {} scores", windows.len(), scores.len()),
        ));
    }
    let total: f64 = scores.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return Err(Error::config(format!(
            "pooling scores must sum to 1 (got {total}); pass the scores of one evaluated set"
        )));
    }
    let (high_idx, low_idx) = quantile_groups(scores, quantile, min_group)?;
    let max_side = windows[0].rows().min(windows[0].cols()).min(6);
    let collect = |idx: &[usize]| -> Result<Vec<LoopStat>> {
        let group: Vec<&Snapshot> = idx.iter().map(|&i| &windows[i]).collect();
        (1..=max_side).map(|side| loop_stats(&group, side)).collect()
    };
    Ok(AttentionReport {
        quantile,
        group_size: high_idx.len(),
        high: collect(&high_idx)?,
        low: collect(&low_idx)?,
    })
}
