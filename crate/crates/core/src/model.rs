//! Physical parameters of the system.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Chemical diffusivity, boundary concentration, and total cell mass.
///
/// `v_star` is the Dirichlet value of the chemical at both endpoints; it is
/// ignored when `d == 0` (no boundary condition on v in that regime).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Chemical diffusivity D >= 0.
    pub d: f64,
    /// Boundary concentration v* (> 0 required when D > 0).
    pub v_star: f64,
    /// Total cell mass M > 0. (M = 0 is accepted for the degenerate
    /// zero-consumption case used in tests.)
    pub mass: f64,
}

impl ModelParams {
    pub fn new(d: f64, v_star: f64, mass: f64) -> Result<ModelParams> {
        let p = ModelParams { d, v_star, mass };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d.is_finite() || self.d < 0.0 {
            return Err(Error::InvalidInput(format!("D must be finite and >= 0, got {}", self.d)));
        }
        if !self.mass.is_finite() || self.mass < 0.0 {
            return Err(Error::InvalidInput(format!("mass must be finite and >= 0, got {}", self.mass)));
        }
        if self.d > 0.0 && (!self.v_star.is_finite() || self.v_star <= 0.0) {
            return Err(Error::InvalidInput(format!(
                "v_star must be > 0 when D > 0, got {}",
                self.v_star
            )));
        }
        Ok(())
    }
}
