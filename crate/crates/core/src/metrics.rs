//! Mean absolute error (the evolution fitness) and coefficient of
//! determination (the held-out score).

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("R² is undefined: actual values have zero variance")]
    ZeroVariance,
}

fn check_lengths(actual: &[f64], predicted: &[f64]) {
    assert_eq!(
        actual.len(),
        predicted.len(),
        "actual and predicted lengths differ"
    );
    assert!(!actual.is_empty(), "metrics need at least one instance");
}

/// `(1/n) Σ |actual_i - predicted_i|`, or `+∞` if any prediction is non-finite.
///
/// Panics on empty input or a length mismatch.
pub fn mae(actual: &[f64], predicted: &[f64]) -> f64 {
    check_lengths(actual, predicted);
    let mut sum = 0.0;
    for (a, p) in actual.iter().zip(predicted) {
        if !p.is_finite() {
            return f64::INFINITY;
        }
        sum += (a - p).abs();
    }
    sum / actual.len() as f64
}

/// MAE over the rows listed in `rows`, in that order.
pub fn mae_at(actual: &[f64], predicted: &[f64], rows: &[usize]) -> f64 {
    assert_eq!(
        actual.len(),
        predicted.len(),
        "actual and predicted lengths differ"
    );
    assert!(!rows.is_empty(), "metrics need at least one instance");
    let mut sum = 0.0;
    for &r in rows {
        let p = predicted[r];
        if !p.is_finite() {
            return f64::INFINITY;
        }
        sum += (actual[r] - p).abs();
    }
    sum / rows.len() as f64
}

/// `1 - SS_res / SS_tot`.
///
/// Can be negative for models worse than the mean predictor. Any non-finite
/// prediction yields `-∞`.
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64, MetricError> {
    check_lengths(actual, predicted);
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    if predicted.iter().any(|p| !p.is_finite()) {
        return Ok(f64::NEG_INFINITY);
    }
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}
