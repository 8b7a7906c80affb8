use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-log least-squares fit `log e = p log h + c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceFit {
    /// Grid spacings or time steps, strictly decreasing.
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_order: f64,
    pub r_squared: f64,
    /// False when some refinement did not reduce the error.
    pub monotone: bool,
}

impl ConvergenceFit {
    /// Error constant `C` in `e ≈ C hᵖ` at the fitted order.
    pub fn constant(&self) -> f64 {
        let n = self.steps.len() as f64;
        let mean_log: f64 =
            self.steps.iter().zip(&self.errors).map(|(h, e)| e.ln() - self.fitted_order * h.ln()).sum::<f64>() / n;
        mean_log.exp()
    }

    pub fn order_within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.fitted_order)
    }
}

pub fn fit_convergence(steps: &[f64], errors: &[f64]) -> Result<ConvergenceFit> {
    if steps.len() != errors.len() {
        return Err(Error::LengthMismatch { expected: steps.len(), got: errors.len() });
    }
    if steps.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: steps.len() });
    }
    if steps.windows(2).any(|w| !(w[1] < w[0])) || steps.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
        return Err(Error::InvalidArgument("refinement steps must be positive and strictly decreasing".into()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidArgument(format!("errors must be positive and finite, got {e}")));
    }
    let x: Vec<f64> = steps.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceFit { steps: steps.to_vec(), errors: errors.to_vec(), fitted_order: slope, r_squared, monotone })
}

/// Tolerance at step `h` from errors measured on a refinement sequence:
/// `safety · max(eᵢ / hᵢᵖ) · hᵖ`.
pub fn calibrate_budget(steps: &[f64], errors: &[f64], order: f64, h: f64, safety: f64) -> Result<f64> {
    if steps.len() != errors.len() || steps.is_empty() {
        return Err(Error::LengthMismatch { expected: steps.len(), got: errors.len() });
    }
    let c = steps.iter().zip(errors).map(|(s, e)| e / s.powf(order)).fold(0.0, f64::max);
    if !c.is_finite() {
        return Err(Error::InvalidArgument("non-finite error in calibration".into()));
    }
    Ok(safety * c * h.powf(order))
}
