//! Run configuration: one structured file per run, command-specific blocks,
//! CLI-flag overrides, and the resolved manifest every command writes back.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snapset_core::model::ModelConfig;
use snapset_core::train::TrainConfig;
use snapset_core::{Error, Result};

/// Numeric precision of a run's model arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// The whole config file. A command reads its own block and the shared
/// defaults; flags override the file; the resolved result is echoed as
/// `manifest.toml` in the output directory, and a manifest is itself a valid
/// config for re-running the same command.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Written by the tool into manifests; accepted (and ignored) on input so
    /// manifests can be fed back verbatim.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainCmdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportConfig>,
}

/// Provenance block of a manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub version: String,
}

/// Shared settings after file values and flag overrides are merged.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub threads: usize,
    pub precision: Precision,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GenerateConfig {
    /// Toric-code ground states pushed through an incoherent bit-flip
    /// channel, measured in the Z basis, and mapped to plaquette grids; one
    /// output file per flip probability.
    Toric {
        torus_rows: usize,
        torus_cols: usize,
        p_flips: Vec<f64>,
        /// Torus samples per flip probability (each yields one plaquette
        /// grid, or several windows of it).
        samples: usize,
        /// Optional `[rows, cols]` window size: each plaquette grid is cut
        /// into disjoint windows of this size.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<[usize; 2]>,
    },
    /// Random-circuit bitstrings: per depth, `instances` independent circuits
    /// are simulated and `shots` bitstrings sampled from each.
    Rqc {
        rows: usize,
        cols: usize,
        depths: Vec<usize>,
        #[serde(default = "one")]
        instances: usize,
        shots: usize,
        /// fSim angles in units of π.
        #[serde(default = "default_theta_pi")]
        theta_pi: f64,
        #[serde(default = "default_phi_pi")]
        phi_pi: f64,
    },
    /// The synthetic parity task: class A is uniform, class B is uniform
    /// conditioned on even parity over the first `k` cells (column-major).
    Parity {
        rows: usize,
        cols: usize,
        k: usize,
        /// Snapshots per class.
        count: usize,
    },
}

fn one() -> usize {
    1
}

fn default_theta_pi() -> f64 {
    0.5
}

fn default_phi_pi() -> f64 {
    0.1
}

/// Which classifier architecture a training run builds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Quan,
    Smlp,
    PabOnly,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::Quan => "quan",
            Variant::Smlp => "smlp",
            Variant::PabOnly => "pab_only",
        })
    }
}

/// Architecture block of the pooling-attention-only model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PabOnlyConfig {
    pub grid: (usize, usize),
    pub set_size: usize,
    /// Per-element perceptron widths; the last width is the pooling width.
    pub widths: Vec<usize>,
    pub residual_activation: snapset_core::model::Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub variant: Variant,
    /// Snapshot files for class 0; each file becomes one pool (sets never mix
    /// snapshots from different files).
    pub label0: Vec<PathBuf>,
    /// Snapshot files for class 1.
    pub label1: Vec<PathBuf>,
    /// Fraction of each pool held out for validation (split once, seeded).
    #[serde(default = "default_val_fraction")]
    pub val_fraction: f64,
    /// Architecture of the `quan` variant (also consulted by `pab_only` when
    /// that block is absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smlp: Option<snapset_core::baselines::SumMlpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pab_only: Option<PabOnlyConfig>,
    pub optim: TrainConfig,
}

fn default_val_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub checkpoint: PathBuf,
    /// Snapshot files to score; each is partitioned into sets and one row of
    /// the report covers one file.
    pub datasets: Vec<PathBuf>,
    /// Known class labels aligned with `datasets`, enabling the accuracy
    /// column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
    /// Sweep-parameter value per dataset (e.g. flip probability); enables the
    /// confidence-crossing estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xs: Option<Vec<f64>>,
    /// Level whose crossing is interpolated when `xs` is present.
    #[serde(default = "default_crossing_level")]
    pub crossing_level: f64,
    /// Label of the set-partition stream. Using a training run's seed and the
    /// default label reproduces that run's validation sets exactly.
    #[serde(default = "default_partition_label")]
    pub partition_label: String,
}

fn default_crossing_level() -> f64 {
    0.5
}

fn default_partition_label() -> String {
    "val-partition".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReportConfig {
    /// Linear cross-entropy benchmark sweep: exact values from the state
    /// vector plus sampled estimates, per depth and circuit instance.
    Xeb {
        rows: usize,
        cols: usize,
        depths: Vec<usize>,
        #[serde(default = "one")]
        instances: usize,
        shots: usize,
        #[serde(default = "default_theta_pi")]
        theta_pi: f64,
        #[serde(default = "default_phi_pi")]
        phi_pi: f64,
    },
    /// Pooling-attention interpretation: closed-loop statistics of the
    /// highest- vs lowest-scored snapshots under a trained model.
    Attention {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[serde(default = "default_quantile")]
        quantile: f64,
        #[serde(default = "default_min_group")]
        min_group: usize,
    },
    /// Sample-complexity scan: the smallest number of sets whose mean
    /// confidence stays one-sidedly above chance, per dataset.
    SampleComplexity {
        checkpoint: PathBuf,
        datasets: Vec<PathBuf>,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_repetitions")]
        repetitions: usize,
    },
}

fn default_quantile() -> f64 {
    0.15
}

fn default_min_group() -> usize {
    10
}

fn default_alpha() -> f64 {
    0.05
}

fn default_repetitions() -> usize {
    10
}

/// Reads a config file; TOML by default, JSON when the extension is `.json`.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    } else {
        toml::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }
}

/// Writes the resolved config (with provenance and shared settings filled in)
/// as `manifest.toml` in the output directory.
pub fn write_manifest(
    command: &str,
    config: &RunConfig,
    resolved: &Resolved,
) -> Result<PathBuf> {
    let mut echo = config.clone();
    echo.meta = Some(Meta {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    });
    echo.seed = Some(resolved.seed);
    echo.threads = Some(resolved.threads);
    echo.precision = Some(resolved.precision);
    echo.out = Some(resolved.out.clone());
    let text = toml::to_string_pretty(&echo)
        .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
    let path = resolved.out.join("manifest.toml");
    std::fs::write(&path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}
