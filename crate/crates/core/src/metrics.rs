//! Error metrics for comparing simulated and measured series.

use crate::error::{Error, Result};

/// Mean squared error `Σ (observed - estimated)² / n`.
pub fn mse(observed: &[f64], estimated: &[f64]) -> Result<f64> {
    if observed.len() != estimated.len() {
        return Err(Error::LengthMismatch {
            left: observed.len(),
            right: estimated.len(),
        });
    }
    if observed.is_empty() {
        return Err(Error::Empty);
    }
    let sum: f64 = observed
        .iter()
        .zip(estimated)
        .map(|(o, e)| (o - e).powi(2))
        .sum();
    Ok(sum / observed.len() as f64)
}
