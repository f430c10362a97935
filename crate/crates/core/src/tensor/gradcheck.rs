//! Finite-difference verification of analytic gradients.
//!
//! [`gradient_check`] compares the gradients a model reports against central
//! differences of its loss, element by element. The loss closure is called
//! many times with perturbed parameters, so it must be deterministic — the
//! checker verifies this up front by evaluating twice and demanding
//! bit-identical losses.
//!
//! An element passes if its relative error `|a−n| / max(|a|, |n|, 1e-12)` is
//! within `tolerance`, or if its absolute error is within `abs_tolerance`.
//! The absolute escape hatch covers directions whose true gradient is exactly
//! zero (e.g. a bias that a following normalization cancels): there the
//! finite difference returns pure rounding noise, the relative error is
//! meaningless, and an absolute comparison is the correct test.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::param::{GradBuffer, ParamSet};

/// Tolerances and step size for [`gradient_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckSettings {
    /// Central-difference step `h` (loss is sampled at ±h).
    pub perturbation: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Absolute error under which an element passes regardless of relative
    /// error (near-null gradient directions).
    pub abs_tolerance: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings { perturbation: 1e-5, tolerance: 1e-4, abs_tolerance: 1e-8 }
    }
}

/// Worst offender across all checked elements.
#[derive(Debug, Clone)]
pub struct WorstElement {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
    pub abs_err: f64,
}

/// Outcome of a [`gradient_check`] run.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Total scalar elements compared.
    pub elements: usize,
    /// Elements that satisfied neither tolerance.
    pub failures: usize,
    /// Largest relative error among elements not excused by `abs_tolerance`.
    pub max_rel_err: f64,
    /// Largest absolute error overall.
    pub max_abs_err: f64,
    /// The element with the largest relative error (if any element was
    /// outside the absolute escape hatch).
    pub worst: Option<WorstElement>,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.failures == 0 && self.elements > 0
    }
}

/// Checks analytic gradients of `f` over every trainable element of `params`.
///
/// `f(params, want_grad)` evaluates the loss at the given parameters and, when
/// `want_grad`, also returns the analytic gradients. The closure must be a
/// pure function of `params` — redraw nothing, or draw from a freshly seeded
/// generator each call.
pub fn gradient_check<R: Real, F>(
    params: &mut ParamSet<R>,
    mut f: F,
    settings: GradCheckSettings,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet<R>, bool) -> Result<(f64, Option<GradBuffer<R>>)>,
{
    let (loss_a, _) = f(params, false)?;
    let (loss_b, _) = f(params, false)?;
    if loss_a.to_bits() != loss_b.to_bits() {
        return Err(Error::config(format!(
            "loss is not deterministic ({loss_a} vs {loss_b}); gradient checking requires a \
             fixed-seed, repeatable forward pass"
        )));
    }

    let (_, analytic) = f(params, true)?;
    let analytic =
        analytic.ok_or_else(|| Error::config("loss closure returned no gradients"))?;

    let h = settings.perturbation;
    let hr = R::from_f64(h);

    let mut elements = 0usize;
    let mut failures = 0usize;
    let mut max_rel_err = 0.0f64;
    let mut max_abs_err = 0.0f64;
    let mut worst: Option<WorstElement> = None;

    for pi in 0..params.len() {
        if !params.at(pi).trainable {
            continue;
        }
        let n_elem = params.at(pi).value.len();
        for ei in 0..n_elem {
            let orig = params.at(pi).value.data()[ei];

            params.at_mut(pi).value.data_mut()[ei] = orig + hr;
            let (loss_p, _) = f(params, false)?;
            params.at_mut(pi).value.data_mut()[ei] = orig - hr;
            let (loss_m, _) = f(params, false)?;
            // Restore the exact original bits.
            params.at_mut(pi).value.data_mut()[ei] = orig;

            let numeric = (loss_p - loss_m) / (2.0 * h);
            let a = analytic.get(pi).map_or(0.0, |g| g.data()[ei].to_f64());

            let abs_err = (a - numeric).abs();
            let rel_err = abs_err / a.abs().max(numeric.abs()).max(1e-12);
            elements += 1;
            max_abs_err = max_abs_err.max(abs_err);

            let excused = abs_err <= settings.abs_tolerance;
            if !excused {
                if rel_err > max_rel_err {
                    max_rel_err = rel_err;
                    worst = Some(WorstElement {
                        param: params.at(pi).name.clone(),
                        index: ei,
                        analytic: a,
                        numeric,
                        rel_err,
                        abs_err,
                    });
                }
                if rel_err > settings.tolerance {
                    failures += 1;
                }
            }
        }
    }

    Ok(GradCheckReport { elements, failures, max_rel_err, max_abs_err, worst })
}
