//! Robust transceiver and antenna-placement design for over-the-air
//! computation with a fluid antenna array.
//!
//! `K` single-antenna users transmit simultaneously to an access point whose
//! `N` antennas can slide along a line of length `L`. The access point wants
//! the average of the users' symbols. Angle-of-arrival estimates are uncertain,
//! so the design minimizes the expected aggregation error under a uniform
//! angle error model. The pipeline is:
//!
//! - [`model`]: scenario configuration, steering vectors and error statistics;
//! - [`objective`]: the closed-form MSE and a Monte-Carlo estimate of it;
//! - [`solvers`]: closed-form power and beamformer updates, the barrier-BFGS
//!   placement update and the outer block coordinate descent;
//! - [`experiments`]: benchmark schemes and parameter sweeps with CSV output;
//! - [`oracle`] and [`validate`]: brute-force and finite-difference checks.

pub mod error;
pub mod experiments;
pub mod model;
pub mod objective;
pub mod oracle;
pub mod seeding;
pub mod solvers;
pub mod validate;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use error::{Error, Result, Violation};
pub use experiments::{run_scheme, run_sweep, write_results, Scheme, SweepResult, SweepSpec};
pub use model::{build_channels, AntennaPositions, ChannelSet, SystemConfig};
pub use objective::{mse_analytic, mse_monte_carlo, MseBreakdown};
pub use solvers::{bcd_solve, BcdSettings, BcdTrace};

/// Decision variables: transmit coefficients `b`, receive beamformer `m`,
/// antenna positions `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub transmit_coeffs: Vec<Complex64>,
    pub beamformer: Vec<Complex64>,
    pub positions: AntennaPositions,
}
