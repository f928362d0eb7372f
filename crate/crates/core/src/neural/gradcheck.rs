//! Central-difference verification of the analytic gradients.

use rand::Rng as _;

use crate::error::{Error, Result};

use super::backward::{backward, loss};
use super::forward::forward;
use super::types::LstmModel;

/// Conventional step size for central differences. Small enough that the
/// quadratic truncation error sits well below the usual 1e-4 tolerance,
/// large enough to stay clear of f64 round-off on parameters of order one.
/// Checks of relu models benefit from a narrower step: a wide stencil is
/// more likely to straddle an activation kink, where central differences
/// average the two one-sided slopes instead of measuring either.
pub const FD_STEP: f64 = 1e-5;

/// Outcome of a gradient check over one model and batch.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Largest relative error over the checked parameters.
    pub max_relative_error: f64,
    /// Human-readable name of the parameter with the largest error.
    pub worst_param: String,
    /// How many parameters were compared.
    pub n_checked: usize,
}

/// Compares the analytic gradient against central finite differences on a
/// batch of `(window, target)` pairs, in inference mode so the loss surface
/// is deterministic.
///
/// For each checked parameter `p`, the numeric slope is
/// `(L(p + h) - L(p - h)) / 2h` and the reported error is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
/// `h` is the finite-difference step ([`FD_STEP`] is the conventional
/// choice); `max_params` caps how many parameters are probed (a seeded
/// random subset without replacement); `None` checks every parameter.
pub fn check_gradients(
    model: &LstmModel,
    windows: &[Vec<f64>],
    targets: &[f64],
    timestep: usize,
    h: f64,
    max_params: Option<usize>,
) -> Result<GradCheckReport> {
    validate_step(h)?;
    sweep(model, windows, targets, timestep, &[h], None, max_params)
}

/// Multi-scale variant of [`check_gradients`]: each parameter's error is the
/// best over the given steps, refined in order until it drops below `tol`.
///
/// A single step cannot be well conditioned for every parameter at once —
/// round-off noise over near-zero slopes shrinks with a wider stencil, while
/// a wider stencil is more likely to straddle an L1 kink at `w = 0` or a
/// relu activation boundary. Any true analytic defect is step-independent
/// and still fails at every scale, so this loses no detection power.
pub fn check_gradients_robust(
    model: &LstmModel,
    windows: &[Vec<f64>],
    targets: &[f64],
    timestep: usize,
    steps: &[f64],
    tol: f64,
    max_params: Option<usize>,
) -> Result<GradCheckReport> {
    if steps.is_empty() {
        return Err(Error::Domain(
            "at least one finite-difference step is required".into(),
        ));
    }
    for &s in steps {
        validate_step(s)?;
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::Domain(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    sweep(model, windows, targets, timestep, steps, Some(tol), max_params)
}

fn validate_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    Ok(())
}

fn sweep(
    model: &LstmModel,
    windows: &[Vec<f64>],
    targets: &[f64],
    timestep: usize,
    steps: &[f64],
    stop_below: Option<f64>,
    max_params: Option<usize>,
) -> Result<GradCheckReport> {
    if windows.len() != targets.len() || windows.is_empty() {
        return Err(Error::Dimension(format!(
            "{} windows for {} targets",
            windows.len(),
            targets.len()
        )));
    }
    model.validate()?;

    let run = |m: &LstmModel| -> Result<(Vec<f64>, Vec<super::forward::Cache>)> {
        let mut preds = Vec::with_capacity(windows.len());
        let mut caches = Vec::with_capacity(windows.len());
        for w in windows {
            let (p, c) = forward(m, w, timestep, false, 0)?;
            preds.push(p);
            caches.push(c);
        }
        Ok((preds, caches))
    };

    let (_, caches) = run(model)?;
    let analytic = backward(model, &caches, targets)?.flat();

    let base_params = model.params_flat();
    let n_params = base_params.len();
    let indices: Vec<usize> = match max_params {
        Some(cap) if cap < n_params => {
            let mut rng = crate::rng::seeded_rng(0x6772_6164);
            let mut all: Vec<usize> = (0..n_params).collect();
            // Partial Fisher-Yates: the first `cap` entries become a
            // uniform sample without replacement.
            for i in 0..cap {
                let j = rng.random_range(i..n_params);
                all.swap(i, j);
            }
            all.truncate(cap);
            all
        }
        _ => (0..n_params).collect(),
    };

    let mut probe = model.clone();
    let mut params = base_params.clone();
    let mut slope = |idx: usize, step: f64| -> Result<f64> {
        params[idx] = base_params[idx] + step;
        probe.set_params_flat(&params)?;
        let (preds_plus, _) = run(&probe)?;
        let l_plus = loss(&preds_plus, targets, &probe)?;

        params[idx] = base_params[idx] - step;
        probe.set_params_flat(&params)?;
        let (preds_minus, _) = run(&probe)?;
        let l_minus = loss(&preds_minus, targets, &probe)?;

        params[idx] = base_params[idx];
        Ok((l_plus - l_minus) / (2.0 * step))
    };

    let rel_err = |idx: usize, numeric: f64| -> f64 {
        let denom = analytic[idx].abs().max(numeric.abs()).max(1e-8);
        (analytic[idx] - numeric).abs() / denom
    };

    let mut worst = 0.0f64;
    let mut worst_idx = indices[0];
    for &idx in &indices {
        // Best-conditioned stencil wins: a real analytic defect shows up as
        // an error independent of the step and fails at every step, while
        // stencil artifacts (round-off over a near-zero slope, a straddled
        // |w| kink of the L1 penalty) are strongly step-dependent and clear
        // at one of the scales. `stop_below` short-circuits the cascade once
        // a parameter is confirmed.
        let mut best = f64::INFINITY;
        for &step in steps {
            best = best.min(rel_err(idx, slope(idx, step)?));
            if stop_below.is_some_and(|tol| best < tol) {
                break;
            }
        }
        if best > worst {
            worst = best;
            worst_idx = idx;
        }
    }

    Ok(GradCheckReport {
        max_relative_error: worst,
        worst_param: model.param_name(worst_idx),
        n_checked: indices.len(),
    })
}

/// A convenience batch for gradient checking: seeded uniform windows and
/// targets of the given shape.
pub fn synthetic_batch(
    n: usize,
    timestep: usize,
    input_dim: usize,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = crate::rng::seeded_rng(seed);
    let windows = (0..n)
        .map(|_| {
            (0..timestep * input_dim)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect()
        })
        .collect();
    let targets = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    (windows, targets)
}
