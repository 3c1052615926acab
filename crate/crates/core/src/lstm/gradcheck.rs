//! Finite-difference verification of analytic gradients.

use ndarray::{Array2, ArrayView2};

use super::train::Trainable;
use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Same maximum without the denominator floor.
    pub max_raw_rel_error: f64,
    pub max_abs_error: f64,
    /// `(tensor index, element index)` of the worst entry.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
}

fn loss<P: Trainable>(model: &P, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<f64, ModelError> {
    let pred = model.predict_batch(x)?;
    Ok(pred.iter().zip(y.iter()).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / y.len() as f64)
}

/// Floor on the relative-error denominator.
///
/// A central difference at step 1e-5 carries roundoff near `1e-16 · |loss| / 1e-5`,
/// so for gradients much below this the bare ratio measures noise, not the
/// analytic gradient. Entries under the floor are effectively held to an
/// absolute tolerance of `1e-4 · REL_ERROR_FLOOR`.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Relative error `|a - n| / max(|a|, |n|, floor)`; `floor = 0` gives the bare ratio,
/// defined as 0 when both values are 0.
pub fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, REL_ERROR_FLOOR)
}

/// Compares analytic gradients of the MSE on `(input, target)` with central differences.
pub fn gradient_check<P: Trainable>(
    model: &P,
    input: &[f64],
    target: &[f64],
    step: f64,
) -> Result<GradCheckReport, ModelError> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let x = Array2::from_shape_vec((1, input.len()), input.to_vec()).expect("row");
    let y = Array2::from_shape_vec((1, target.len()), target.to_vec()).expect("row");
    let (_, grads) = model.loss_and_grad(x.view(), y.view(), 1.0)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_raw_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
        checked: 0,
    };
    for (ti, grad) in analytic.iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let orig = probe.tensors()[ti][k];
            probe.tensors_mut()[ti][k] = orig + step;
            let up = loss(&probe, x.view(), y.view())?;
            probe.tensors_mut()[ti][k] = orig - step;
            let down = loss(&probe, x.view(), y.view())?;
            probe.tensors_mut()[ti][k] = orig;
            let numeric = (up - down) / (2.0 * step);
            let err = relative_error(a, numeric);
            report.checked += 1;
            report.max_raw_rel_error = report.max_raw_rel_error.max(relative_error_with_floor(a, numeric, 0.0));
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((ti, k));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_only_affects_tiny_gradients() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert_eq!(relative_error(2.0, 1.0), 0.5);
        assert_eq!(relative_error_with_floor(2e-9, 1e-9, 0.0), 0.5);
        assert!((relative_error(2e-9, 1e-9) - 1e-3).abs() < 1e-15);
    }
}
