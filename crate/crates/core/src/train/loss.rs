//! Scalar loss functions (the differentiable batch form lives on the tape).

use crate::error::{Error, Result};
use crate::real::Real;

/// Two-term binary cross-entropy of one confidence against one binary label,
/// with the confidence clamped to `[1e-7, 1 − 1e-7]` before the logarithms.
pub fn bce_loss<R: Real>(confidence: R, label: u8) -> Result<R> {
    if label > 1 {
        return Err(Error::config(format!("label {label} outside {{0, 1}}")));
    }
    let (lo, hi) = (R::from_f64(1e-7), R::from_f64(1.0 - 1e-7));
    let y = confidence.max(lo).min(hi);
    let t = R::from_f64(label as f64);
    Ok(-(t * y.ln() + (R::one() - t) * (R::one() - y).ln()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(0.5f64, 1).unwrap() - ln2).abs() < 1e-12);
        assert!((bce_loss(0.5f64, 0).unwrap() - ln2).abs() < 1e-12);
        assert!((bce_loss(0.9f64, 1).unwrap() - (-0.9f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn clamped_at_the_edges() {
        assert!(bce_loss(1.0f64, 0).unwrap().is_finite());
        assert!(bce_loss(0.0f64, 1).unwrap().is_finite());
    }

    #[test]
    fn bad_label_rejected() {
        assert!(bce_loss(0.5f64, 2).is_err());
    }
}
