//! Moment-order accounting for the stacked encoder.
//!
//! One encoder layer with `N_s` mini-sets correlates products of up to
//! `2·N_s²` set elements (each mini-set's self-attention is quadratic, the
//! recurrent/reducing stages chain all `N_s` mini-sets); stacking `L` layers
//! compounds multiplicatively. These two functions are the bookkeeping for
//! choosing a depth that reaches a target correlation order.

/// Highest moment order accessible to an encoder with `mini_sets` mini-sets
/// per layer and `layers` layers: `(2·mini_sets²)^layers`. Zero layers access
/// only first moments. Saturates instead of overflowing. `mini_sets ≥ 1`.
pub fn moment_order(mini_sets: usize, layers: usize) -> u128 {
    debug_assert!(mini_sets >= 1);
    let base = 2u128.saturating_mul((mini_sets as u128).saturating_mul(mini_sets as u128));
    let mut acc: u128 = 1;
    for _ in 0..layers {
        acc = acc.saturating_mul(base);
    }
    acc
}

/// Smallest layer count whose accessible moment order reaches `theta`, i.e.
/// `⌈log_{2·mini_sets²} theta⌉` with `theta = 1 → 0`. `theta, mini_sets ≥ 1`.
pub fn layers_required(theta: u128, mini_sets: usize) -> usize {
    debug_assert!(theta >= 1 && mini_sets >= 1);
    let base = 2u128.saturating_mul((mini_sets as u128).saturating_mul(mini_sets as u128));
    let mut layers = 0;
    let mut acc: u128 = 1;
    while acc < theta {
        acc = acc.saturating_mul(base);
        layers += 1;
    }
    layers
}
