//! Weight initialization schemes.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::real::Real;
use crate::tensor::Tensor;

/// Initialization scheme for trainable weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Weights and biases uniform on `±1/√fan_in` (the common framework
    /// default for linear and convolution layers; configs may also spell it
    /// `default`).
    #[serde(alias = "default")]
    UniformFanIn,
    /// Weights normal with variance `2/(fan_in + fan_out)`; biases zero.
    XavierNormal,
}

/// Draws a weight tensor of the given shape. Elements are drawn in row-major
/// order as f64 (then narrowed), so a seed produces the same stream at every
/// precision.
pub fn weight<R: Real, G: Rng>(
    init: Init,
    rng: &mut G,
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
) -> Tensor<R> {
    let n: usize = shape.iter().product();
    let data: Vec<R> = match init {
        Init::UniformFanIn => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            (0..n).map(|_| R::from_f64(dist.sample(rng))).collect()
        }
        Init::XavierNormal => {
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Normal::new(0.0, std).expect("positive std");
            (0..n).map(|_| R::from_f64(dist.sample(rng))).collect()
        }
    };
    Tensor::from_vec(shape, data).expect("shape matches element count")
}

/// Draws a bias vector of length `n` for a layer with the given fan-in.
pub fn bias<R: Real, G: Rng>(init: Init, rng: &mut G, n: usize, fan_in: usize) -> Tensor<R> {
    match init {
        Init::UniformFanIn => {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let data: Vec<R> = (0..n).map(|_| R::from_f64(dist.sample(rng))).collect();
            Tensor::from_vec(&[n], data).expect("length matches")
        }
        Init::XavierNormal => Tensor::zeros(&[n]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;

    #[test]
    fn xavier_variance_matches_fan_formula() {
        // 72×16 matrix: variance should be 2/(72+16) = 2/88.
        let mut sum_sq = 0.0f64;
        let mut count = 0usize;
        for seed in 0..10u64 {
            let mut rng = stream(seed, "init-var-test");
            let w: Tensor<f64> = weight(Init::XavierNormal, &mut rng, &[16, 72], 72, 16);
            for &v in w.data() {
                sum_sq += v * v;
                count += 1;
            }
        }
        let var = sum_sq / count as f64;
        let target = 2.0 / 88.0;
        assert!(
            (var - target).abs() / target < 0.05,
            "sample variance {var} vs target {target}"
        );
    }

    #[test]
    fn xavier_biases_are_zero() {
        let mut rng = stream(0, "init-bias-test");
        let b: Tensor<f64> = bias(Init::XavierNormal, &mut rng, 5, 72);
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn uniform_fan_in_respects_bound() {
        let mut rng = stream(1, "init-bound-test");
        let w: Tensor<f64> = weight(Init::UniformFanIn, &mut rng, &[8, 25], 25, 8);
        let bound = 1.0 / 5.0;
        assert!(w.data().iter().all(|&v| v.abs() <= bound));
        // A reasonable spread, not all tiny.
        assert!(w.data().iter().any(|&v| v.abs() > bound * 0.5));
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = stream(7, "init-det");
        let mut b = stream(7, "init-det");
        let wa: Tensor<f64> = weight(Init::XavierNormal, &mut a, &[4, 4], 4, 4);
        let wb: Tensor<f64> = weight(Init::XavierNormal, &mut b, &[4, 4], 4, 4);
        assert_eq!(wa.data(), wb.data());
    }
}
