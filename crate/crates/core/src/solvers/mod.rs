//! Block coordinate descent over transmit coefficients, receive beamformer and
//! antenna placement.

mod bcd;
mod beamformer;
mod placement;
mod power;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bcd::{alternate_transceiver, bcd_solve, bcd_solve_from, BcdIteration, BcdTrace};
pub use beamformer::solve_beamformer;
pub use placement::{
    barrier_value, placement_gradient, placement_objective, solve_positions, PlacementOutcome,
    PlacementProblem,
};
pub use power::{optimal_coefficient, solve_power};

/// Tolerances and schedules for the outer loop and the barrier BFGS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcdSettings {
    pub outer_tolerance: f64,
    pub max_outer_iters: usize,
    pub barrier_mu_init: f64,
    pub barrier_mu_shrink: f64,
    pub barrier_mu_floor: f64,
    pub grad_tolerance: f64,
    pub step_tolerance: f64,
    pub max_bfgs_iters: usize,
}

impl Default for BcdSettings {
    fn default() -> Self {
        BcdSettings {
            outer_tolerance: 1e-4,
            max_outer_iters: 100,
            // Placement gradients are O(1e-2); a unit barrier swamps them and
            // drags every warm start to the analytic center.
            barrier_mu_init: 1e-2,
            barrier_mu_shrink: 10.0,
            barrier_mu_floor: 1e-8,
            grad_tolerance: 1e-6,
            step_tolerance: 1e-8,
            max_bfgs_iters: 200,
        }
    }
}

impl BcdSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tolerance", self.outer_tolerance),
            ("barrier_mu_init", self.barrier_mu_init),
            ("barrier_mu_floor", self.barrier_mu_floor),
            ("grad_tolerance", self.grad_tolerance),
            ("step_tolerance", self.step_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.barrier_mu_shrink.is_finite() && self.barrier_mu_shrink > 1.0) {
            return Err(Error::InvalidConfig(format!(
                "barrier_mu_shrink must exceed 1, got {}",
                self.barrier_mu_shrink
            )));
        }
        if self.max_outer_iters == 0 || self.max_bfgs_iters == 0 {
            return Err(Error::InvalidConfig(
                "iteration limits must be at least 1".into(),
            ));
        }
        Ok(())
    }
}
