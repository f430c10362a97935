//! Synthetic two-class task whose classes differ only in one k-th-order
//! moment.
//!
//! Class A is uniform over all n-bit grids. Class B is uniform over the
//! grids whose parity over a fixed k-cell mask is even: a uniform draw is
//! post-processed by flipping the last mask cell when the masked parity is
//! odd. The flip is a bijection between odd- and even-parity strings, so B
//! is exactly uniform on the even-parity half — every statistic involving
//! fewer than all k mask cells (with any non-mask cells) is identical
//! between the classes, and only the full k-th-order correlation over the
//! mask separates them.

use rand::Rng;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};

/// The two task classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityClass {
    /// Uniform over all bitstrings.
    A,
    /// Uniform over even-masked-parity bitstrings.
    B,
}

/// The fixed parity mask: the first `k` cells in column-major order,
/// i.e. `(0,0), (1,0), …, (rows−1,0), (0,1), …`.
pub fn parity_mask(rows: usize, cols: usize, k: usize) -> Result<Vec<(usize, usize)>> {
    let n = rows * cols;
    if !(3..=n).contains(&k) {
        return Err(Error::config(format!(
            "mask order k must satisfy 3 ≤ k ≤ {n} (grid {rows}×{cols}), got {k}"
        )));
    }
    Ok((0..k).map(|i| (i % rows, i / rows)).collect())
}

/// Forces even parity on the masked bits by flipping the last mask cell
/// when the parity is odd.
pub(crate) fn apply_even_parity(bits: &mut [u8], mask_flat: &[usize]) {
    let parity = mask_flat.iter().fold(0u8, |p, &i| p ^ bits[i]);
    if parity == 1 {
        let last = *mask_flat.last().expect("mask has k ≥ 3 cells");
        bits[last] ^= 1;
    }
}

/// Draws `count` samples of the given class on a `rows × cols` grid with a
/// k-cell mask.
pub fn sample_parity_class(
    rows: usize,
    cols: usize,
    k: usize,
    class: ParityClass,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Snapshot>> {
    let mask_flat: Vec<usize> =
        parity_mask(rows, cols, k)?.into_iter().map(|(r, c)| r * cols + c).collect();
    (0..count)
        .map(|_| {
            let mut bits: Vec<u8> = (0..rows * cols).map(|_| rng.gen_range(0..2u8)).collect();
            if class == ParityClass::B {
                apply_even_parity(&mut bits, &mask_flat);
            }
            Snapshot::new(rows, cols, bits)
        })
        .collect()
}

/// Masked parity of one snapshot as a `±1` product (`+1` for even).
pub fn masked_parity_product(snapshot: &Snapshot, mask: &[(usize, usize)]) -> f64 {
    let parity = mask.iter().fold(0u8, |p, &(r, c)| p ^ snapshot.get(r, c));
    if parity == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;

    #[test]
    fn mask_is_column_major_prefix() {
        let mask = parity_mask(2, 3, 4).unwrap();
        assert_eq!(mask, vec![(0, 0), (1, 0), (0, 1), (1, 1)]);
        assert!(parity_mask(2, 3, 2).is_err());
        assert!(parity_mask(2, 3, 7).is_err());
    }

    #[test]
    fn class_b_with_full_mask_hits_exactly_the_even_strings() {
        let mut rng = stream(1, "parity");
        let samples = sample_parity_class(1, 3, 3, ParityClass::B, 2000, &mut rng).unwrap();
        let mut seen = std::collections::HashSet::new();
        for s in &samples {
            let bits = s.bits();
            assert_eq!(bits.iter().fold(0u8, |p, &b| p ^ b), 0);
            seen.insert((bits[0], bits[1], bits[2]));
        }
        assert_eq!(seen.len(), 4, "all four even-parity strings appear");
    }

    #[test]
    fn every_statistic_short_of_the_full_mask_is_exactly_uniform() {
        // Enumerate the exact class-B output distribution on a 2×3 grid with
        // k = 4 by pushing all 64 equally likely inputs through the flip.
        let (rows, cols, k) = (2usize, 3usize, 4usize);
        let n = rows * cols;
        let mask_flat: Vec<usize> =
            parity_mask(rows, cols, k).unwrap().into_iter().map(|(r, c)| r * cols + c).collect();
        let full_mask_bits: u64 = mask_flat.iter().map(|&i| 1u64 << i).sum();

        let mut mass = vec![0u32; 1 << n];
        for input in 0..1u32 << n {
            let mut bits: Vec<u8> = (0..n).map(|i| ((input >> i) & 1) as u8).collect();
            apply_even_parity(&mut bits, &mask_flat);
            let out: u32 = bits.iter().enumerate().map(|(i, &b)| (b as u32) << i).sum();
            mass[out as usize] += 1;
        }

        // Every cell subset that does not contain the whole mask has an
        // exactly uniform joint distribution.
        for subset in 1u64..1 << n {
            if subset & full_mask_bits == full_mask_bits {
                continue;
            }
            let cells = subset.count_ones();
            let mut counts = std::collections::HashMap::new();
            for (out, &m) in mass.iter().enumerate() {
                *counts.entry(out as u64 & subset).or_insert(0u32) += m;
            }
            assert_eq!(counts.len(), 1 << cells);
            for (&assignment, &total) in &counts {
                assert_eq!(
                    total,
                    (1u32 << n) >> cells,
                    "subset {subset:b}, assignment {assignment:b}"
                );
            }
        }

        // The full mask, by contrast, is maximally skewed: odd-parity
        // assignments never occur.
        let mut even = 0u32;
        let mut odd = 0u32;
        for (out, &m) in mass.iter().enumerate() {
            if (out as u64 & full_mask_bits).count_ones() % 2 == 0 {
                even += m;
            } else {
                odd += m;
            }
        }
        assert_eq!(odd, 0);
        assert_eq!(even, 64);
    }

    #[test]
    fn masked_parity_product_separates_the_classes() {
        let mut rng = stream(2, "parity");
        let mask = parity_mask(2, 3, 4).unwrap();

        let b = sample_parity_class(2, 3, 4, ParityClass::B, 5000, &mut rng).unwrap();
        assert!(b.iter().all(|s| masked_parity_product(s, &mask) == 1.0));

        let a = sample_parity_class(2, 3, 4, ParityClass::A, 10_000, &mut rng).unwrap();
        let mean: f64 =
            a.iter().map(|s| masked_parity_product(s, &mask)).sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.03, "class A masked parity mean {mean}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let draw = |seed: u64| {
            let mut rng = stream(seed, "parity");
            sample_parity_class(2, 3, 4, ParityClass::B, 50, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }
}
