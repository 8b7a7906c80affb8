use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant and particle mass, both strictly positive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawConstants")]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    hbar: f64,
    mass: f64,
}

impl TryFrom<RawConstants> for PhysicalConstants {
    type Error = Error;
    fn try_from(r: RawConstants) -> Result<Self> {
        PhysicalConstants::new(r.hbar, r.mass)
    }
}

impl PhysicalConstants {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidArgument(format!("hbar must be finite and > 0, got {hbar}")));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidArgument(format!("mass must be finite and > 0, got {mass}")));
        }
        Ok(PhysicalConstants { hbar, mass })
    }

    /// hbar = m = 1.
    pub fn natural() -> Self {
        PhysicalConstants { hbar: 1.0, mass: 1.0 }
    }

    /// K = (hbar * lambda)^2 / 2m.
    pub fn k_from_lambda(&self, lambda: f64) -> f64 {
        let p = self.hbar * lambda;
        p * p / (2.0 * self.mass)
    }

    /// lambda = sqrt(2 m K) / hbar; negative K is rejected.
    pub fn lambda_from_k(&self, k: f64) -> Result<f64> {
        if k < 0.0 {
            return Err(Error::NegativeK(k));
        }
        Ok((2.0 * self.mass * k).sqrt() / self.hbar)
    }
}
