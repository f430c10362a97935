//! Learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step decay: `lr = base_lr · gamma^⌊epoch / step_size⌋`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct StepLr {
    pub step_size: usize,
    pub gamma: f64,
}

/// No decay: unit gamma at any step width.
impl Default for StepLr {
    fn default() -> Self {
        StepLr { step_size: 1, gamma: 1.0 }
    }
}

impl StepLr {
    pub fn validate(&self) -> Result<()> {
        if self.step_size == 0 {
            return Err(Error::config("schedule step_size must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("schedule gamma must be positive and finite"));
        }
        Ok(())
    }

    /// Learning rate at a 0-based epoch.
    pub fn lr_at(&self, base_lr: f64, epoch: usize) -> f64 {
        base_lr * self.gamma.powi((epoch / self.step_size) as i32)
    }
}
