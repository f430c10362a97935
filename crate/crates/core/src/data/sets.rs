//! Set batching: partitioning snapshot pools into fixed-size sets and the
//! canonical element order used for reproducible evaluation.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::snapshot::Snapshot;
use crate::error::{Error, Result};

/// Stable lexicographic order of a set's snapshots.
///
/// Set classifiers are order-free in exact arithmetic, but floating-point
/// summation is not; evaluating every set in this canonical order makes
/// predictions bit-identical across input permutations. Scores computed in
/// canonical order map back through [`restore_order`].
pub fn canonical_order(set: &[Snapshot]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..set.len()).collect();
    idx.sort_by(|&a, &b| set[a].bits().cmp(set[b].bits()));
    idx
}

/// Clones the set's snapshots in the given order.
pub fn reorder(set: &[Snapshot], order: &[usize]) -> Vec<Snapshot> {
    order.iter().map(|&i| set[i].clone()).collect()
}

/// Maps per-element values computed in `order` back to original positions:
/// `out[order[i]] = values[i]`.
pub fn restore_order<T: Copy + Default>(values: &[T], order: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); values.len()];
    for (i, &src) in order.iter().enumerate() {
        out[src] = values[i];
    }
    out
}

/// Randomly partitions pool indices `0..count` into `⌊count/set_size⌋`
/// disjoint sets; leftovers are discarded.
pub fn partition_into_sets<G: Rng>(
    count: usize,
    set_size: usize,
    rng: &mut G,
) -> Result<Vec<Vec<usize>>> {
    if set_size == 0 || set_size > count {
        return Err(Error::config(format!(
            "cannot partition {count} snapshots into sets of {set_size}"
        )));
    }
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(rng);
    Ok(idx.chunks_exact(set_size).map(|c| c.to_vec()).collect())
}

/// Retains snapshots whose total bit count equals `n` (particle-number
/// post-selection for ingested hardware data).
pub fn filter_particle_number(snapshots: &[Snapshot], n: usize) -> Vec<Snapshot> {
    snapshots.iter().filter(|s| s.weight() == n).cloned().collect()
}
