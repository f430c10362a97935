//! Linear cross-entropy benchmarking (XEB).
//!
//! For an ideal distribution `p` over `2^{N_q}` bitstrings, the exact XEB
//! fidelity is `2^{N_q}·Σ_b p(b)² − 1`; the sampled estimate replaces the
//! sum with the empirical mean `2^{N_q}·⟨p(B_i)⟩_i − 1` over measured
//! bitstrings and carries the standard error of that mean. Uniform `p`
//! gives 0; a delta distribution gives `2^{N_q} − 1`.

use num_complex::Complex64;

use crate::data::rqc::born_probabilities;
use crate::error::{Error, Result};

/// Sampled XEB estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct XebEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn qubit_count(len: usize) -> Result<u32> {
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::shape(
            "xeb",
            format!("{len} probabilities is not a power-of-two bitstring space"),
        ));
    }
    Ok(len.trailing_zeros())
}

/// Exact XEB of a normalized state vector.
pub fn xeb_exact(state: &[Complex64]) -> Result<f64> {
    xeb_exact_from_probs(&born_probabilities(state)?)
}

/// Exact XEB from a full probability table (must sum to 1 within 1e-8).
pub fn xeb_exact_from_probs(probs: &[f64]) -> Result<f64> {
    let n_q = qubit_count(probs.len())?;
    let norm: f64 = probs.iter().sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::config(format!("probabilities sum to {norm}, expected 1")));
    }
    let sum_sq: f64 = probs.iter().map(|p| p * p).sum();
    Ok((1u64 << n_q) as f64 * sum_sq - 1.0)
}

/// Plug-in XEB estimate from sampled bitstring indices and the ideal
/// probability table.
pub fn xeb_estimate(sample_indices: &[u64], probs: &[f64]) -> Result<XebEstimate> {
    let n_q = qubit_count(probs.len())?;
    if sample_indices.is_empty() {
        return Err(Error::config("XEB estimate needs at least one sample"));
    }
    let scale = (1u64 << n_q) as f64;
    let mut vals = Vec::with_capacity(sample_indices.len());
    for &idx in sample_indices {
        let p = *probs
            .get(idx as usize)
            .ok_or_else(|| Error::shape("xeb_estimate", format!("bitstring index {idx} out of range")))?;
        vals.push(scale * p);
    }
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let stderr = if vals.len() < 2 {
        0.0
    } else {
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    };
    Ok(XebEstimate { value: mean - 1.0, stderr, samples: vals.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::rqc::{sample_bitstrings, simulate, snapshot_to_index, RqcParams};
    use crate::seeds::stream;
    use rand::Rng;

    #[test]
    fn uniform_gives_zero_and_delta_gives_the_upper_bound() {
        let uniform = vec![1.0 / 16.0; 16];
        assert!(xeb_exact_from_probs(&uniform).unwrap().abs() < 1e-12);

        let mut delta = vec![0.0; 16];
        delta[5] = 1.0;
        assert!((xeb_exact_from_probs(&delta).unwrap() - 15.0).abs() < 1e-12);

        assert!(xeb_exact_from_probs(&vec![0.1; 10]).is_err());
        assert!(xeb_exact_from_probs(&vec![0.3; 4]).is_err());
    }

    #[test]
    fn single_sample_at_a_delta_peak_reaches_the_bound() {
        let mut delta = vec![0.0; 16];
        delta[3] = 1.0;
        let est = xeb_estimate(&[3], &delta).unwrap();
        assert_eq!(est.value, 15.0);
        assert_eq!(est.stderr, 0.0);

        assert!(xeb_estimate(&[], &delta).is_err());
        assert!(xeb_estimate(&[16], &delta).is_err());
    }

    #[test]
    fn ideal_samples_estimate_the_exact_value() {
        let params = RqcParams::new(2, 2, 8);
        let state = simulate(&params, 3).unwrap();
        let exact = xeb_exact(&state).unwrap();
        let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();

        let mut rng = stream(4, "xeb");
        let snaps = sample_bitstrings(&state, (2, 2), 100_000, &mut rng).unwrap();
        let indices: Vec<u64> = snaps.iter().map(snapshot_to_index).collect();
        let est = xeb_estimate(&indices, &probs).unwrap();
        assert!(
            (est.value - exact).abs() < 3.0 * est.stderr,
            "estimate {} vs exact {exact} (stderr {})",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn uniform_samples_against_any_state_average_to_zero() {
        let state = simulate(&RqcParams::new(2, 2, 6), 8).unwrap();
        let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
        let mut rng = stream(5, "xeb");
        let indices: Vec<u64> = (0..50_000).map(|_| rng.gen_range(0..16u64)).collect();
        let est = xeb_estimate(&indices, &probs).unwrap();
        assert!(est.value.abs() < 3.0 * est.stderr, "{} vs 0 ± {}", est.value, est.stderr);
    }

    #[test]
    fn estimator_is_unbiased_over_resamples() {
        let params = RqcParams::new(2, 4, 8);
        let state = simulate(&params, 6).unwrap();
        let exact = xeb_exact(&state).unwrap();
        let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();

        let mut rng = stream(7, "xeb");
        let estimates: Vec<f64> = (0..100)
            .map(|_| {
                let snaps = sample_bitstrings(&state, (2, 4), 2000, &mut rng).unwrap();
                let indices: Vec<u64> = snaps.iter().map(snapshot_to_index).collect();
                xeb_estimate(&indices, &probs).unwrap().value
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / 100.0;
        let sd =
            (estimates.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        let combined = sd / 10.0;
        assert!(
            (mean - exact).abs() < 3.0 * combined,
            "resample mean {mean} vs exact {exact} ± {combined}"
        );
    }
}
