//! Accuracy metrics for wear predictions in physical units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean absolute percentage error in percent:
/// `100/n * sum_i |measured_i - predicted_i| / measured_i`.
///
/// Every measured value must be strictly positive and finite — the metric
/// divides by it — and predictions must be finite.
pub fn mape(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} measured values for {} predictions",
            measured.len(),
            predicted.len()
        )));
    }
    if measured.is_empty() {
        return Err(Error::Dimension("MAPE of an empty set".into()));
    }
    let mut sum = 0.0;
    for (i, (&m, &p)) in measured.iter().zip(predicted).enumerate() {
        if !m.is_finite() || m <= 0.0 {
            return Err(Error::Domain(format!(
                "measured value at index {i} is {m}; MAPE needs strictly positive references"
            )));
        }
        if !p.is_finite() {
            return Err(Error::Domain(format!(
                "prediction at index {i} is not finite ({p})"
            )));
        }
        sum += (m - p).abs() / m;
    }
    Ok(100.0 * sum / measured.len() as f64)
}

/// Mean absolute error in the units of the inputs.
pub fn mean_abs_error(measured: &[f64], predicted: &[f64]) -> Result<f64> {
    if measured.len() != predicted.len() || measured.is_empty() {
        return Err(Error::Dimension(format!(
            "{} measured values for {} predictions",
            measured.len(),
            predicted.len()
        )));
    }
    Ok(measured
        .iter()
        .zip(predicted)
        .map(|(m, p)| (m - p).abs())
        .sum::<f64>()
        / measured.len() as f64)
}

/// Accuracy summary for one evaluated split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalReport {
    pub n_samples: usize,
    pub mape_percent: f64,
    pub mae_um: f64,
    pub max_abs_err_um: f64,
}

impl EvalReport {
    pub fn compute(measured: &[f64], predicted: &[f64]) -> Result<Self> {
        let mape_percent = mape(measured, predicted)?;
        let mae_um = mean_abs_error(measured, predicted)?;
        let max_abs_err_um = measured
            .iter()
            .zip(predicted)
            .map(|(m, p)| (m - p).abs())
            .fold(0.0f64, f64::max);
        Ok(EvalReport {
            n_samples: measured.len(),
            mape_percent,
            mae_um,
            max_abs_err_um,
        })
    }
}
