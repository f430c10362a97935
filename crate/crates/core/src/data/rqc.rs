//! Small state-vector simulator for two-dimensional random circuits.
//!
//! Qubits sit on a `rows × cols` grid; qubit `(r, c)` owns bit `r·cols + c`
//! of the amplitude index, least-significant bit at `(0, 0)`. One circuit
//! cycle is a random single-qubit layer followed by a two-qubit layer of
//! `fSim(θ, φ)` gates on one of four grid edge colorings; the colorings
//! repeat in the order `A B C D C D A B`. A depth-`d` circuit runs `d`
//! cycles plus one final single-qubit layer (depth 0 is the identity).
//!
//! Single-qubit gates are drawn per qubit and layer from the eight-element
//! set `{√X^{±1}, √Y^{±1}, √W^{±1}, √V^{±1}}` with `W = (X+Y)/√2` and
//! `V = (X−Y)/√2`, never repeating the gate the same qubit received in the
//! previous layer. `fSim` uses the convention
//! `[[cosθ, −i·sinθ], [−i·sinθ, cosθ]]` on the `{01, 10}` block and the
//! phase `e^{−iφ}` on `|11⟩`.

use num_complex::Complex64;
use rand::Rng;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};
use crate::seeds::stream;

/// Largest supported qubit count (2^24 amplitudes ≈ 256 MiB).
pub const MAX_QUBITS: usize = 24;

/// Number of distinct single-qubit gates in the draw set.
pub const GATE_COUNT: usize = 8;

/// Random-circuit description. `theta`/`phi` default to the hardware-style
/// angles `0.5π` and `0.1π` via [`RqcParams::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct RqcParams {
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
    pub theta: f64,
    pub phi: f64,
}

impl RqcParams {
    pub fn new(rows: usize, cols: usize, depth: usize) -> Self {
        RqcParams {
            rows,
            cols,
            depth,
            theta: 0.5 * std::f64::consts::PI,
            phi: 0.1 * std::f64::consts::PI,
        }
    }

    pub fn qubits(&self) -> usize {
        self.rows * self.cols
    }
}

/// The four grid edge colorings used by the two-qubit layers: `A`/`B` are
/// vertical edges with even/odd coordinate parity `(r + c) % 2` of the upper
/// endpoint, `C`/`D` the same split for horizontal edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeColor {
    A,
    B,
    C,
    D,
}

/// Per-cycle coloring sequence.
pub const CYCLE_PATTERN: [EdgeColor; 8] = [
    EdgeColor::A,
    EdgeColor::B,
    EdgeColor::C,
    EdgeColor::D,
    EdgeColor::C,
    EdgeColor::D,
    EdgeColor::A,
    EdgeColor::B,
];

/// Qubit-index pairs of one coloring, in deterministic row-major order.
pub fn colored_edges(rows: usize, cols: usize, color: EdgeColor) -> Vec<(usize, usize)> {
    let q = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    match color {
        EdgeColor::A | EdgeColor::B => {
            let parity = usize::from(matches!(color, EdgeColor::B));
            for r in 0..rows.saturating_sub(1) {
                for c in 0..cols {
                    if (r + c) % 2 == parity {
                        edges.push((q(r, c), q(r + 1, c)));
                    }
                }
            }
        }
        EdgeColor::C | EdgeColor::D => {
            let parity = usize::from(matches!(color, EdgeColor::D));
            for r in 0..rows {
                for c in 0..cols.saturating_sub(1) {
                    if (r + c) % 2 == parity {
                        edges.push((q(r, c), q(r, c + 1)));
                    }
                }
            }
        }
    }
    edges
}

/// 2×2 matrix of single-qubit gate `index` (0..8): `√X`, `√X⁻¹`, `√Y`,
/// `√Y⁻¹`, `√W`, `√W⁻¹`, `√V`, `√V⁻¹`.
pub fn gate_matrix(index: usize) -> [[Complex64; 2]; 2] {
    let i = Complex64::i();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]];
    let y = [[Complex64::ZERO, -i], [i, Complex64::ZERO]];
    let w = [[Complex64::ZERO, s * (Complex64::ONE - i)], [s * (Complex64::ONE + i), Complex64::ZERO]];
    let v = [[Complex64::ZERO, s * (Complex64::ONE + i)], [s * (Complex64::ONE - i), Complex64::ZERO]];
    let base = match index / 2 {
        0 => x,
        1 => y,
        2 => w,
        3 => v,
        _ => panic!("gate index {index} out of range"),
    };
    // √G = e^{iπ/4}(I − iG)/√2 for an involutory G; the odd indices are the
    // conjugate-transpose inverses e^{−iπ/4}(I + iG)/√2.
    let (phase, sign) = if index % 2 == 0 {
        ((i * std::f64::consts::FRAC_PI_4).exp(), -i)
    } else {
        ((-i * std::f64::consts::FRAC_PI_4).exp(), i)
    };
    let mut out = [[Complex64::ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            let ident = if r == c { Complex64::ONE } else { Complex64::ZERO };
            out[r][c] = phase * s * (ident + sign * base[r][c]);
        }
    }
    out
}

/// Draws a gate index, excluding the previous layer's gate on this qubit.
pub(crate) fn gate_choice(rng: &mut impl Rng, last: Option<usize>) -> usize {
    match last {
        None => rng.gen_range(0..GATE_COUNT),
        Some(prev) => {
            let c = rng.gen_range(0..GATE_COUNT - 1);
            if c >= prev {
                c + 1
            } else {
                c
            }
        }
    }
}

fn apply_single_qubit(state: &mut [Complex64], q: usize, m: &[[Complex64; 2]; 2]) {
    let mask = 1usize << q;
    for n in 0..state.len() {
        if n & mask == 0 {
            let a0 = state[n];
            let a1 = state[n | mask];
            state[n] = m[0][0] * a0 + m[0][1] * a1;
            state[n | mask] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

pub(crate) fn apply_fsim(state: &mut [Complex64], qa: usize, qb: usize, theta: f64, phi: f64) {
    let (ma, mb) = (1usize << qa, 1usize << qb);
    let cos = Complex64::new(theta.cos(), 0.0);
    let msin = Complex64::new(0.0, -theta.sin());
    let phase = Complex64::new(0.0, -phi).exp();
    for n in 0..state.len() {
        if n & ma == 0 && n & mb == 0 {
            let n01 = n | mb;
            let n10 = n | ma;
            let a01 = state[n01];
            let a10 = state[n10];
            state[n01] = cos * a01 + msin * a10;
            state[n10] = msin * a01 + cos * a10;
            state[n | ma | mb] *= phase;
        }
    }
}

/// Runs the circuit from `|0…0⟩` and returns the final state vector along
/// with the drawn single-qubit gate indices, one row per single-qubit layer
/// in application order. Fully determined by `(params, seed)`.
pub fn simulate_recorded(
    params: &RqcParams,
    seed: u64,
) -> Result<(Vec<Complex64>, Vec<Vec<usize>>)> {
    let n = params.qubits();
    if n == 0 {
        return Err(Error::config("circuit grid must contain at least one qubit"));
    }
    if n > MAX_QUBITS {
        return Err(Error::config(format!(
            "circuit grid has {n} qubits, the state-vector cap is {MAX_QUBITS}"
        )));
    }
    let mut state = vec![Complex64::ZERO; 1usize << n];
    state[0] = Complex64::ONE;
    let mut rng = stream(seed, "circuit");
    let mut last: Vec<Option<usize>> = vec![None; n];
    let mut record = Vec::new();
    let sq_layer = |state: &mut [Complex64], rng: &mut _, last: &mut Vec<Option<usize>>| {
        let mut layer = Vec::with_capacity(n);
        for q in 0..n {
            let g = gate_choice(rng, last[q]);
            apply_single_qubit(state, q, &gate_matrix(g));
            last[q] = Some(g);
            layer.push(g);
        }
        layer
    };
    for cycle in 0..params.depth {
        record.push(sq_layer(&mut state, &mut rng, &mut last));
        let color = CYCLE_PATTERN[cycle % CYCLE_PATTERN.len()];
        for (qa, qb) in colored_edges(params.rows, params.cols, color) {
            apply_fsim(&mut state, qa, qb, params.theta, params.phi);
        }
    }
    if params.depth > 0 {
        record.push(sq_layer(&mut state, &mut rng, &mut last));
    }
    let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonFinite(format!("circuit state norm drifted to {norm}")));
    }
    Ok((state, record))
}

/// Runs the circuit and returns only the final state vector.
pub fn simulate(params: &RqcParams, seed: u64) -> Result<Vec<Complex64>> {
    simulate_recorded(params, seed).map(|(state, _)| state)
}

/// Born probabilities `|amplitude|²`, checking normalization to 1e-8.
pub fn born_probabilities(state: &[Complex64]) -> Result<Vec<f64>> {
    let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
    let norm: f64 = probs.iter().sum();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::config(format!("state is not normalized: Σ|a|² = {norm}")));
    }
    Ok(probs)
}

/// Draws `count` i.i.d. computational-basis samples from the state.
pub fn sample_bitstrings(
    state: &[Complex64],
    grid: (usize, usize),
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Snapshot>> {
    let (rows, cols) = grid;
    if state.len() != 1usize << (rows * cols) {
        return Err(Error::shape(
            "sample_bitstrings",
            format!("{} amplitudes for a {rows}×{cols} qubit grid", state.len()),
        ));
    }
    let probs = born_probabilities(state)?;
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0f64;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    Ok((0..count)
        .map(|_| {
            let u: f64 = rng.gen();
            let idx = cdf.partition_point(|&x| x <= u).min(cdf.len() - 1);
            index_to_snapshot(idx as u64, rows, cols)
        })
        .collect())
}

/// Amplitude index of a snapshot: bit `(r, c)` occupies position `r·cols+c`.
pub fn snapshot_to_index(s: &Snapshot) -> u64 {
    let mut idx = 0u64;
    for (pos, &b) in s.bits().iter().enumerate() {
        idx |= (b as u64) << pos;
    }
    idx
}

/// Inverse of [`snapshot_to_index`] for a `rows × cols` grid.
pub fn index_to_snapshot(idx: u64, rows: usize, cols: usize) -> Snapshot {
    Snapshot::from_fn(rows, cols, |r, c| ((idx >> (r * cols + c)) & 1) as u8)
        .expect("positive grid dimensions")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_mul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
        let mut out = [[Complex64::ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                for k in 0..2 {
                    out[r][c] += a[r][k] * b[k][c];
                }
            }
        }
        out
    }

    fn approx_eq(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn gate_set_is_unitary_and_squares_to_its_base() {
        let i = Complex64::i();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bases = [
            [[Complex64::ZERO, Complex64::ONE], [Complex64::ONE, Complex64::ZERO]],
            [[Complex64::ZERO, -i], [i, Complex64::ZERO]],
            [[Complex64::ZERO, s * (Complex64::ONE - i)], [s * (Complex64::ONE + i), Complex64::ZERO]],
            [[Complex64::ZERO, s * (Complex64::ONE + i)], [s * (Complex64::ONE - i), Complex64::ZERO]],
        ];
        for g in 0..GATE_COUNT {
            let m = gate_matrix(g);
            // U·U† = I.
            let mut dagger = [[Complex64::ZERO; 2]; 2];
            for r in 0..2 {
                for c in 0..2 {
                    dagger[r][c] = m[c][r].conj();
                }
            }
            let prod = mat_mul(&m, &dagger);
            for r in 0..2 {
                for c in 0..2 {
                    let expect = if r == c { Complex64::ONE } else { Complex64::ZERO };
                    assert!(approx_eq(prod[r][c], expect, 1e-12), "gate {g} not unitary");
                }
            }
        }
        // (√G)² = G and √G·√G⁻¹ = I.
        for (pair, base) in bases.iter().enumerate() {
            let root = gate_matrix(2 * pair);
            let inv = gate_matrix(2 * pair + 1);
            let sq = mat_mul(&root, &root);
            let id = mat_mul(&root, &inv);
            for r in 0..2 {
                for c in 0..2 {
                    assert!(approx_eq(sq[r][c], base[r][c], 1e-12), "√G² ≠ G for pair {pair}");
                    let expect = if r == c { Complex64::ONE } else { Complex64::ZERO };
                    assert!(approx_eq(id[r][c], expect, 1e-12));
                }
            }
        }
    }

    #[test]
    fn fsim_matches_the_four_by_four_oracle() {
        // fSim(π/2, 0): |01⟩ ↦ −i|10⟩ (and symmetrically |10⟩ ↦ −i|01⟩).
        let mut state = vec![Complex64::ZERO; 4];
        state[0b01] = Complex64::ONE;
        apply_fsim(&mut state, 0, 1, std::f64::consts::FRAC_PI_2, 0.0);
        assert!(approx_eq(state[0b10], -Complex64::i(), 1e-15));
        assert!(state.iter().enumerate().all(|(n, a)| n == 0b10 || a.norm() < 1e-15));

        // |11⟩ only collects the conditional phase e^{−iφ}.
        let phi = 0.1 * std::f64::consts::PI;
        let mut state = vec![Complex64::ZERO; 4];
        state[0b11] = Complex64::ONE;
        apply_fsim(&mut state, 0, 1, std::f64::consts::FRAC_PI_2, phi);
        assert!(approx_eq(state[0b11], Complex64::new(0.0, -phi).exp(), 1e-15));

        // |00⟩ is untouched.
        let mut state = vec![Complex64::ZERO; 4];
        state[0b00] = Complex64::ONE;
        apply_fsim(&mut state, 0, 1, std::f64::consts::FRAC_PI_2, phi);
        assert!(approx_eq(state[0b00], Complex64::ONE, 1e-15));
    }

    #[test]
    fn depth_zero_is_the_all_zeros_amplitude() {
        let state = simulate(&RqcParams::new(2, 3, 0), 9).unwrap();
        assert!(approx_eq(state[0], Complex64::ONE, 1e-15));
        assert!(state[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn evolution_is_norm_preserving_and_seed_deterministic() {
        let params = RqcParams::new(2, 3, 10);
        let state = simulate(&params, 4).unwrap();
        let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-10);

        let again = simulate(&params, 4).unwrap();
        assert!(state
            .iter()
            .zip(&again)
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

        let other = simulate(&params, 5).unwrap();
        assert!(state.iter().zip(&other).any(|(a, b)| (a - b).norm() > 1e-6));
    }

    #[test]
    fn single_qubit_gates_never_repeat_on_a_qubit() {
        let (_, record) = simulate_recorded(&RqcParams::new(1, 5, 12), 7).unwrap();
        assert_eq!(record.len(), 13);
        for q in 0..5 {
            for t in 1..record.len() {
                assert_ne!(record[t][q], record[t - 1][q], "qubit {q}, layer {t}");
            }
        }
    }

    #[test]
    fn zero_angle_circuit_factorizes_into_single_qubit_products() {
        let mut params = RqcParams::new(2, 2, 3);
        params.theta = 0.0;
        params.phi = 0.0;
        let (state, record) = simulate_recorded(&params, 11).unwrap();

        // With fSim(0, 0) = I the state is ⊗_q (Π_layers U_q)|0⟩.
        let mut per_qubit = vec![[[Complex64::ZERO; 2]; 2]; 4];
        for (q, u) in per_qubit.iter_mut().enumerate() {
            u[0][0] = Complex64::ONE;
            u[1][1] = Complex64::ONE;
            for layer in &record {
                *u = mat_mul(&gate_matrix(layer[q]), u);
            }
        }
        for n in 0..16usize {
            let mut expect = Complex64::ONE;
            for (q, u) in per_qubit.iter().enumerate() {
                expect *= u[(n >> q) & 1][0];
            }
            assert!(approx_eq(state[n], expect, 1e-12), "amplitude {n}");
        }
    }

    #[test]
    fn colorings_partition_the_grid_edges() {
        let rows = 3;
        let cols = 4;
        let mut all: Vec<(usize, usize)> = Vec::new();
        for color in [EdgeColor::A, EdgeColor::B, EdgeColor::C, EdgeColor::D] {
            let edges = colored_edges(rows, cols, color);
            // Every edge is a nearest-neighbor pair, no qubit repeats within
            // one coloring (gates in a layer commute / act disjointly).
            let mut seen = std::collections::HashSet::new();
            for &(a, b) in &edges {
                let (ra, ca) = (a / cols, a % cols);
                let (rb, cb) = (b / cols, b % cols);
                assert_eq!(ra.abs_diff(rb) + ca.abs_diff(cb), 1);
                assert!(seen.insert(a) && seen.insert(b), "qubit reused within a layer");
            }
            all.extend(edges);
        }
        all.sort_unstable();
        all.dedup();
        // 2·3·4 − 3 − 4 = 17 grid edges in total.
        assert_eq!(all.len(), rows * cols * 2 - rows - cols);
    }

    #[test]
    fn born_sampling_follows_the_distribution() {
        use crate::seeds::stream;

        // Delta state: every sample is the same bitstring.
        let mut delta = vec![Complex64::ZERO; 16];
        delta[0b1010] = Complex64::ONE;
        let mut rng = stream(1, "born");
        let snaps = sample_bitstrings(&delta, (2, 2), 50, &mut rng).unwrap();
        assert!(snaps.iter().all(|s| snapshot_to_index(s) == 0b1010));

        // Uniform two-qubit state: all four outcomes near 1/4.
        let amp = Complex64::new(0.5, 0.0);
        let uniform = vec![amp; 4];
        let m = 100_000usize;
        let snaps = sample_bitstrings(&uniform, (1, 2), m, &mut rng).unwrap();
        let mut counts = [0usize; 4];
        for s in &snaps {
            counts[snapshot_to_index(s) as usize] += 1;
        }
        let band = 3.0 * (0.25 * 0.75 / m as f64).sqrt();
        for (b, &count) in counts.iter().enumerate() {
            let freq = count as f64 / m as f64;
            assert!((freq - 0.25).abs() < band, "outcome {b}: {freq}");
        }

        // Unnormalized input is rejected.
        let bad = vec![amp; 3];
        assert!(born_probabilities(&bad).is_err());
    }

    #[test]
    fn snapshot_index_mapping_round_trips() {
        for idx in [0u64, 1, 5, 63] {
            let s = index_to_snapshot(idx, 2, 3);
            assert_eq!(snapshot_to_index(&s), idx);
        }
        // LSB is qubit (0, 0).
        let s = index_to_snapshot(1, 2, 3);
        assert_eq!(s.get(0, 0), 1);
        assert_eq!(s.weight(), 1);

        assert!(simulate(&RqcParams::new(5, 5, 2), 0).is_err());
    }
}
