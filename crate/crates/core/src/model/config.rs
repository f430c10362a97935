//! Architecture hyperparameters and their validity rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activation used inside residual feed-forward blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
}

/// Per-snapshot embedding stage in front of the attention encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrontEnd {
    /// 2-D convolution (stride 1, valid) with per-channel batch norm, output
    /// flattened channel-major to width `channels·(N_r−kernel+1)·(N_c−kernel+1)`.
    Conv { channels: usize, kernel: usize },
    /// Stack of logistic perceptron layers on the flattened bits; `widths`
    /// are the layer output sizes in order.
    Mlp { widths: Vec<usize> },
    /// Raw flattened bits, width `N_r·N_c`.
    Flatten,
}

/// Complete shape specification of a set-attention classifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Snapshot grid `(N_r, N_c)`.
    pub grid: (usize, usize),
    /// Snapshots per input set (N).
    pub set_size: usize,
    /// Mini-sets per encoder layer (N_s); 1 disables partitioning.
    pub mini_sets: usize,
    /// Encoder layer count (L); 0 connects the front end directly to pooling.
    pub layers: usize,
    /// Hidden feature width (d_h).
    pub d_h: usize,
    /// Attention head count (n_h) for encoder blocks.
    pub n_heads: usize,
    pub front_end: FrontEnd,
    pub residual_activation: Activation,
}

impl ModelConfig {
    /// Feature width the front end hands to the encoder (d_x).
    pub fn feature_width(&self) -> usize {
        let (nr, nc) = self.grid;
        match &self.front_end {
            FrontEnd::Conv { channels, kernel } => {
                channels * (nr - kernel + 1) * (nc - kernel + 1)
            }
            FrontEnd::Mlp { widths } => *widths.last().unwrap_or(&0),
            FrontEnd::Flatten => nr * nc,
        }
    }

    /// Set size entering encoder layer `layer` (0-based).
    pub fn layer_input_size(&self, layer: usize) -> usize {
        self.set_size / self.mini_sets.pow(layer as u32)
    }

    /// Elements remaining after the full encoder, i.e. the pooled set size.
    pub fn encoder_output_size(&self) -> usize {
        self.layer_input_size(self.layers)
    }

    pub fn validate(&self) -> Result<()> {
        let (nr, nc) = self.grid;
        if nr == 0 || nc == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        if self.set_size == 0 {
            return Err(Error::config("set_size must be positive"));
        }
        if self.mini_sets == 0 {
            return Err(Error::config("mini_sets must be at least 1"));
        }
        if self.d_h == 0 || self.n_heads == 0 {
            return Err(Error::config("d_h and n_heads must be positive"));
        }
        if self.d_h % self.n_heads != 0 {
            return Err(Error::config(format!(
                "d_h = {} not divisible by n_heads = {}",
                self.d_h, self.n_heads
            )));
        }
        let shrink = self
            .mini_sets
            .checked_pow(self.layers as u32)
            .ok_or_else(|| Error::config("mini_sets^layers overflows"))?;
        if self.set_size % shrink != 0 {
            return Err(Error::config(format!(
                "set_size = {} not divisible by mini_sets^layers = {shrink}",
                self.set_size
            )));
        }
        match &self.front_end {
            FrontEnd::Conv { channels, kernel } => {
                if *channels == 0 {
                    return Err(Error::config("conv channels must be positive"));
                }
                if *kernel == 0 || *kernel > nr.min(nc) {
                    return Err(Error::config(format!(
                        "conv kernel {} exceeds grid {nr}×{nc}",
                        kernel
                    )));
                }
            }
            FrontEnd::Mlp { widths } => {
                if widths.is_empty() || widths.contains(&0) {
                    return Err(Error::config("mlp widths must be nonempty and positive"));
                }
            }
            FrontEnd::Flatten => {}
        }
        if self.layers == 0 && self.feature_width() != self.d_h {
            return Err(Error::config(format!(
                "with no encoder layers the front end must emit d_h = {} features, got {}",
                self.d_h,
                self.feature_width()
            )));
        }
        Ok(())
    }
}
