//! Shared statistics: set-level confidence and accuracy summaries, level
//! crossings on response curves, rank correlation, and the one-sided
//! one-sample t-test used by the sample-complexity scan.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Mean and standard error of the mean (sample standard deviation with
/// `n−1` in the denominator; a single observation has standard error 0).
pub fn mean_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::config("cannot summarize an empty sample"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Ok((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Mean confidence over evaluated sets with its standard error.
pub fn average_confidence(confidences: &[f64]) -> Result<(f64, f64)> {
    mean_stderr(confidences)
}

/// Fraction of `(confidence, label)` pairs classified correctly at the
/// threshold: predicted class is 1 when `confidence > threshold`.
pub fn accuracy(scored: &[(f64, u8)], threshold: f64) -> Result<f64> {
    if scored.is_empty() {
        return Err(Error::config("cannot compute accuracy over zero sets"));
    }
    let correct = scored
        .iter()
        .filter(|(y, label)| (*y > threshold) == (*label == 1))
        .count();
    Ok(correct as f64 / scored.len() as f64)
}

/// First crossing of a response curve through `level`, by linear
/// interpolation between adjacent points. `xs` must be strictly increasing
/// and aligned with `ys`.
pub fn crossing_point(xs: &[f64], ys: &[f64], level: f64) -> Result<Option<f64>> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::config(format!(
            "crossing needs two aligned curves of ≥ 2 points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("crossing abscissae must be strictly increasing"));
    }
    for i in 0..xs.len() - 1 {
        let (y0, y1) = (ys[i] - level, ys[i + 1] - level);
        if y0 == 0.0 {
            return Ok(Some(xs[i]));
        }
        if y0 * y1 < 0.0 {
            let frac = y0 / (y0 - y1);
            return Ok(Some(xs[i] + frac * (xs[i + 1] - xs[i])));
        }
    }
    if ys[ys.len() - 1] == level {
        return Ok(Some(xs[xs.len() - 1]));
    }
    Ok(None)
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::config("rank correlation needs two aligned samples of ≥ 2 points"));
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        // Average rank for the tie group spanning positions i..=j (1-based).
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::config("rank correlation is undefined for a constant sample"));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// One-sided one-sample t-test result (alternative: mean > null).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub dof: f64,
}

/// Tests the alternative `mean(xs) > null_mean` with `n−1` degrees of
/// freedom. A zero-variance sample degenerates: the test rejects with
/// certainty when the common value exceeds the null and never otherwise.
pub fn t_test_greater(xs: &[f64], null_mean: f64) -> Result<TTest> {
    if xs.len() < 2 {
        return Err(Error::config(format!(
            "t-test needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let dof = n - 1.0;
    if var == 0.0 {
        return Ok(if mean > null_mean {
            TTest { t: f64::INFINITY, p: 0.0, dof }
        } else {
            TTest { t: if mean == null_mean { 0.0 } else { f64::NEG_INFINITY }, p: 1.0, dof }
        });
    }
    let t = (mean - null_mean) / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::config(format!("t distribution: {e}")))?;
    Ok(TTest { t, p: 1.0 - dist.cdf(t), dof })
}

/// Convenience: does the one-sided test reject at significance `alpha`?
pub fn t_rejects(xs: &[f64], null_mean: f64, alpha: f64) -> Result<bool> {
    Ok(t_test_greater(xs, null_mean)?.p < alpha)
}
