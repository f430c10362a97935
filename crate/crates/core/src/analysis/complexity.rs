//! Sample-complexity estimation: the minimal number of evaluated sets whose
//! mean confidence is distinguishable from the trivial phase.
//!
//! Given per-set confidences at one parameter point, the scan shuffles the
//! sets, then walks the prefix length `D` downward from the full count,
//! applying a one-sided t-test of the null `mean ≤ 0.5`. `D*` is the
//! smallest prefix that still rejects — the next smaller prefix fails. If
//! even the full collection fails, the complexity is not defined at this
//! point (past the crossover there is nothing to detect). The reported cost
//! multiplies `D*` by snapshots per set and cells per snapshot.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::analysis::stats::{mean_stderr, t_rejects};
use crate::error::{Error, Result};

/// Sample-complexity summary over shuffle repetitions at one point.
#[derive(Debug, Clone, Serialize)]
pub struct SampleComplexity {
    pub repetitions: usize,
    /// `D*` of each repetition where it was defined.
    pub d_star: Vec<usize>,
    /// Mean of `D*·N·N_cells` over defined repetitions, when any.
    pub mean_cost: Option<f64>,
    pub stderr_cost: Option<f64>,
}

/// Minimal prefix length of `ordered_scores` whose one-sided t-test rejects
/// `mean ≤ 0.5` at `alpha`, scanning `D` downward. `None` when even the full
/// collection fails to reject.
///
/// The returned `D*` satisfies: the test rejects on the first `D*` scores
/// and fails on the first `D*−1` (a length-1 prefix cannot reject — the
/// test needs two observations).
pub fn minimal_passing_sets(ordered_scores: &[f64], alpha: f64) -> Result<Option<usize>> {
    if ordered_scores.len() < 2 {
        return Err(Error::config("sample-complexity scan needs at least 2 sets"));
    }
    if !t_rejects(ordered_scores, 0.5, alpha)? {
        return Ok(None);
    }
    for d in (2..ordered_scores.len()).rev() {
        if !t_rejects(&ordered_scores[..d], 0.5, alpha)? {
            return Ok(Some(d + 1));
        }
    }
    Ok(Some(2))
}

/// Repeats the `D*` scan over fresh shuffles of the per-set confidences and
/// aggregates the cost `D*·set_size·cells_per_snapshot`.
pub fn sample_complexity(
    confidences: &[f64],
    set_size: usize,
    cells_per_snapshot: usize,
    repetitions: usize,
    alpha: f64,
    rng: &mut impl Rng,
) -> Result<SampleComplexity> {
    if repetitions == 0 {
        return Err(Error::config("sample-complexity needs at least one repetition"));
    }
    let mut d_star = Vec::new();
    let mut shuffled = confidences.to_vec();
    for _ in 0..repetitions {
        shuffled.shuffle(rng);
        if let Some(d) = minimal_passing_sets(&shuffled, alpha)? {
            d_star.push(d);
        }
    }
    let (mean_cost, stderr_cost) = if d_star.is_empty() {
        (None, None)
    } else {
        let costs: Vec<f64> =
            d_star.iter().map(|&d| (d * set_size * cells_per_snapshot) as f64).collect();
        let (m, se) = mean_stderr(&costs)?;
        (Some(m), Some(se))
    };
    Ok(SampleComplexity { repetitions, d_star, mean_cost, stderr_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::stream;

    #[test]
    fn certain_scores_need_only_two_sets() {
        let scores = vec![1.0; 6];
        assert_eq!(minimal_passing_sets(&scores, 0.05).unwrap(), Some(2));

        let mut rng = stream(1, "complexity");
        let result = sample_complexity(&scores, 64, 36, 10, 0.05, &mut rng).unwrap();
        assert_eq!(result.d_star, vec![2; 10]);
        assert_eq!(result.mean_cost, Some(2.0 * 64.0 * 36.0));
        assert_eq!(result.stderr_cost, Some(0.0));
    }

    #[test]
    fn symmetric_scores_are_undefined() {
        let scores = [0.4, 0.6, 0.45, 0.55, 0.5, 0.5];
        assert_eq!(minimal_passing_sets(&scores, 0.05).unwrap(), None);

        let mut rng = stream(2, "complexity");
        let result = sample_complexity(&scores, 64, 36, 5, 0.05, &mut rng).unwrap();
        assert!(result.d_star.is_empty());
        assert_eq!(result.mean_cost, None);
    }

    #[test]
    fn d_star_passes_and_its_predecessor_fails() {
        // A strong prefix followed by noise: the boundary is genuine.
        let scores = [0.9, 0.85, 0.95, 0.8, 0.9, 0.52, 0.48, 0.55, 0.45, 0.5];
        let d = minimal_passing_sets(&scores, 0.05).unwrap().unwrap();
        assert!(t_rejects(&scores[..d], 0.5, 0.05).unwrap());
        if d > 2 {
            assert!(!t_rejects(&scores[..d - 1], 0.5, 0.05).unwrap());
        }
    }

    #[test]
    fn weaker_separation_needs_more_sets() {
        // Synthetic grid: confidences drift toward 0.5, so the mean D* cost
        // rises — the rank correlation between separation index and cost is
        // positive.
        let mut rng = stream(3, "complexity");
        let mut costs = Vec::new();
        let mut index = Vec::new();
        for (i, level) in [0.95, 0.8, 0.65, 0.58].iter().enumerate() {
            let scores: Vec<f64> = (0..40)
                .map(|j| level + 0.2 * ((j * 7 % 11) as f64 / 11.0 - 0.5))
                .collect();
            let result = sample_complexity(&scores, 64, 36, 10, 0.05, &mut rng).unwrap();
            costs.push(result.mean_cost.unwrap());
            index.push(i as f64);
        }
        let rho = crate::analysis::stats::spearman(&index, &costs).unwrap();
        assert!(rho > 0.0, "costs {costs:?}");
    }
}
