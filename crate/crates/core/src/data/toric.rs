//! Exact toric-code Z-basis sampler on a torus, with an independent bit-flip
//! channel and the plaquette (smallest-loop) transformation.
//!
//! Qubits live on the edges of an `rows × cols` periodic vertex lattice, so
//! there are `2·rows·cols` of them. An edge measurement record is stored as
//! a `2·rows × cols` snapshot:
//!
//! * row `2r`, column `c` holds the horizontal edge from vertex `(r, c)` to
//!   `(r, c+1)` — written `h(r, c)`;
//! * row `2r+1`, column `c` holds the vertical edge from `(r, c)` to
//!   `(r+1, c)` — written `v(r, c)`.
//!
//! Bit value 0 encodes a `+1` Z outcome, 1 encodes `−1`. The plaquette with
//! top-left corner `(r, c)` multiplies `h(r, c)`, `h(r+1, c)`, `v(r, c)`,
//! and `v(r, c+1)` (indices wrap), i.e. XORs the four bits.
//!
//! Ground-state sampling is exact and O(edges): starting from all-zeros,
//! each vertex star (the four edges meeting at a vertex) is flipped
//! independently with probability 1/2. Star flips preserve every plaquette
//! product, so every sample has all plaquettes `+1`, and the walk reaches
//! the whole closed-loop configuration group uniformly.

use rand::Rng;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};

/// Periodic vertex lattice that hosts the edge qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Torus {
    pub rows: usize,
    pub cols: usize,
}

impl Torus {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::config(format!(
                "torus needs at least 2×2 vertices, got {rows}×{cols}"
            )));
        }
        Ok(Torus { rows, cols })
    }

    pub fn edges(&self) -> usize {
        2 * self.rows * self.cols
    }

    /// Flat bit index of `h(r, c)` in the edge-snapshot layout.
    fn h(&self, r: usize, c: usize) -> usize {
        (2 * (r % self.rows)) * self.cols + (c % self.cols)
    }

    /// Flat bit index of `v(r, c)` in the edge-snapshot layout.
    fn v(&self, r: usize, c: usize) -> usize {
        (2 * (r % self.rows) + 1) * self.cols + (c % self.cols)
    }
}

/// Draws one noiseless Z-basis sample of the toric-code ground state: every
/// plaquette product is `+1` by construction.
pub fn sample_ground_state(torus: Torus, rng: &mut impl Rng) -> Snapshot {
    let mut bits = vec![0u8; torus.edges()];
    for r in 0..torus.rows {
        for c in 0..torus.cols {
            if rng.gen_bool(0.5) {
                // Star at vertex (r, c): the two horizontal and two vertical
                // edges meeting there.
                bits[torus.h(r, c)] ^= 1;
                bits[torus.h(r, c + torus.cols - 1)] ^= 1;
                bits[torus.v(r, c)] ^= 1;
                bits[torus.v(r + torus.rows - 1, c)] ^= 1;
            }
        }
    }
    Snapshot::new(2 * torus.rows, torus.cols, bits).expect("edge layout is a valid snapshot")
}

/// Draws `count` independent ground-state samples.
pub fn sample_ground_states(torus: Torus, count: usize, rng: &mut impl Rng) -> Vec<Snapshot> {
    (0..count).map(|_| sample_ground_state(torus, rng)).collect()
}

/// Flips every bit of every snapshot independently with probability
/// `p_flip` — the incoherent X error channel acting on Z-basis records.
pub fn apply_bitflip_channel(
    snapshots: &[Snapshot],
    p_flip: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Snapshot>> {
    if !(0.0..=0.5).contains(&p_flip) {
        return Err(Error::config(format!("p_flip must lie in [0, 0.5], got {p_flip}")));
    }
    Ok(snapshots
        .iter()
        .map(|s| {
            let bits = s.bits().iter().map(|&b| b ^ u8::from(rng.gen_bool(p_flip))).collect();
            Snapshot::new(s.rows(), s.cols(), bits).expect("flip preserves geometry")
        })
        .collect())
}

/// Converts an edge-layout snapshot (`2·rows × cols`) to the `rows × cols`
/// grid of plaquette values, bit 1 meaning the four-edge product is `−1`.
pub fn plaquette_transform(edge_snapshot: &Snapshot) -> Result<Snapshot> {
    if edge_snapshot.rows() % 2 != 0 || edge_snapshot.rows() < 4 || edge_snapshot.cols() < 2 {
        return Err(Error::shape(
            "plaquette_transform",
            format!(
                "edge snapshot must be 2·rows × cols with rows, cols ≥ 2, got {}×{}",
                edge_snapshot.rows(),
                edge_snapshot.cols()
            ),
        ));
    }
    let torus = Torus { rows: edge_snapshot.rows() / 2, cols: edge_snapshot.cols() };
    let bits = edge_snapshot.bits();
    Snapshot::from_fn(torus.rows, torus.cols, |r, c| {
        bits[torus.h(r, c)] ^ bits[torus.h(r + 1, c)] ^ bits[torus.v(r, c)] ^ bits[torus.v(r, c + 1)]
    })
}

/// Cuts a plaquette grid into non-overlapping `w_r × w_c` windows, row-major
/// over window positions. Both grid dimensions must divide evenly.
pub fn window_slices(grid: &Snapshot, w_r: usize, w_c: usize) -> Result<Vec<Snapshot>> {
    if w_r == 0 || w_c == 0 || grid.rows() % w_r != 0 || grid.cols() % w_c != 0 {
        return Err(Error::shape(
            "window_slices",
            format!("{}×{} grid does not tile into {w_r}×{w_c} windows", grid.rows(), grid.cols()),
        ));
    }
    let mut out = Vec::with_capacity((grid.rows() / w_r) * (grid.cols() / w_c));
    for br in 0..grid.rows() / w_r {
        for bc in 0..grid.cols() / w_c {
            out.push(grid.window(br * w_r, bc * w_c, w_r, w_c)?);
        }
    }
    Ok(out)
}

/// XOR of the plaquette bits in an `h × w` block anchored at `(r0, c0)`,
/// with toroidal wrap-around. Because interior edges cancel pairwise, this
/// equals the Z product around the block's perimeter loop (0 ↦ `+1`,
/// 1 ↦ `−1`).
pub fn block_parity(grid: &Snapshot, r0: usize, c0: usize, h: usize, w: usize) -> u8 {
    let mut parity = 0u8;
    for dr in 0..h {
        for dc in 0..w {
            parity ^= grid.get((r0 + dr) % grid.rows(), (c0 + dc) % grid.cols());
        }
    }
    parity
}

/// Mean of the `±1` block product over every (wrapped) anchor position of
/// every grid — the Monte Carlo estimate of the closed-loop expectation
/// `⟨Z_closed(γ)⟩` for the rectangular loop of perimeter `2(h+w)`.
pub fn mean_block_product(grids: &[Snapshot], h: usize, w: usize) -> f64 {
    let mut total = 0.0f64;
    let mut count = 0usize;
    for grid in grids {
        for r0 in 0..grid.rows() {
            for c0 in 0..grid.cols() {
                total += if block_parity(grid, r0, c0, h, w) == 0 { 1.0 } else { -1.0 };
                count += 1;
            }
        }
    }
    if count == 0 {
        return 0.0;
    }
    total / count as f64
}
