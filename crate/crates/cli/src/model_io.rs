//! Shared plumbing: loading snapshot pools with geometry checks and
//! rebuilding any model variant from a checkpoint.

use std::path::Path;

use snapset_core::baselines::{PoolingOnly, SumMlp, SumMlpConfig};
use snapset_core::data::format::read_snapshots;
use snapset_core::data::Snapshot;
use snapset_core::model::checkpoint::load_checkpoint;
use snapset_core::model::{ModelConfig, SetAttentionClassifier, SetClassifier};
use snapset_core::{Error, Real, Result};

/// One snapshot file read into memory, with its stem and metadata kept for
/// report rows.
pub struct LoadedPool {
    pub stem: String,
    pub snapshots: Vec<Snapshot>,
    pub meta: serde_json::Value,
}

/// Reads a snapshot file, naming the path in any error.
pub fn read_pool(path: &Path) -> Result<LoadedPool> {
    let (snapshots, meta) = read_snapshots(path)
        .map_err(|e| Error::Config(format!("dataset {}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(LoadedPool { stem, snapshots, meta })
}

/// Checks one pool's snapshot geometry against the model's grid; the error
/// names the mismatching field.
pub fn check_geometry(pool: &LoadedPool, grid: (usize, usize), path: &Path) -> Result<()> {
    let first = pool
        .snapshots
        .first()
        .ok_or_else(|| Error::Config(format!("dataset {} is empty", path.display())))?;
    if (first.rows(), first.cols()) != grid {
        return Err(Error::Config(format!(
            "grid: dataset {} holds {}×{} snapshots, the model expects {}×{}",
            path.display(),
            first.rows(),
            first.cols(),
            grid.0,
            grid.1
        )));
    }
    Ok(())
}

/// Rebuilds whichever model variant a checkpoint holds.
pub fn load_model<R: Real>(path: &Path) -> Result<Box<dyn SetClassifier<R>>> {
    let loaded = load_checkpoint::<R>(path)
        .map_err(|e| Error::Config(format!("checkpoint {}: {e}", path.display())))?;
    let parse_model = |config: &serde_json::Value| -> Result<ModelConfig> {
        serde_json::from_value(config.clone())
            .map_err(|e| Error::Config(format!("checkpoint {}: config: {e}", path.display())))
    };
    match loaded.variant.as_str() {
        "quan" => {
            let config = parse_model(&loaded.config)?;
            Ok(Box::new(SetAttentionClassifier::from_params(config, loaded.params)?))
        }
        "pab_only" => {
            let config = parse_model(&loaded.config)?;
            Ok(Box::new(PoolingOnly::from_params(config, loaded.params)?))
        }
        "smlp" => {
            let config: SumMlpConfig = serde_json::from_value(loaded.config.clone())
                .map_err(|e| {
                    Error::Config(format!("checkpoint {}: config: {e}", path.display()))
                })?;
            Ok(Box::new(SumMlp::from_params(config, loaded.params)?))
        }
        other => Err(Error::Config(format!(
            "checkpoint {} holds unknown model variant {other:?}",
            path.display()
        ))),
    }
}

/// Writes `rows` as a CSV file with the given header.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| Error::Format(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}

/// Writes a JSON summary file.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
