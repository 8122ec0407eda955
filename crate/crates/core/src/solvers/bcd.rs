use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::model::{build_channels, AntennaPositions, ChannelSet, SystemConfig};
use crate::objective::mse_analytic;
use crate::solvers::{solve_beamformer, solve_positions, solve_power, BcdSettings};
use crate::Solution;

/// One outer iteration: the MSE after each block update and how far each block moved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdIteration {
    pub iteration: usize,
    pub objective_after_beamformer: f64,
    pub objective_after_power: f64,
    pub objective_after_positions: f64,
    pub delta_beamformer: f64,
    pub delta_transmit: f64,
    pub delta_positions: f64,
    pub bfgs_iterations: usize,
}

impl BcdIteration {
    pub fn objective(&self) -> f64 {
        self.objective_after_positions
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BcdTrace {
    pub iterations: Vec<BcdIteration>,
    pub converged: bool,
}

impl BcdTrace {
    /// Every block-update objective in the order it was produced.
    pub fn objective_sequence(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .flat_map(|it| {
                [
                    it.objective_after_beamformer,
                    it.objective_after_power,
                    it.objective_after_positions,
                ]
            })
            .collect()
    }

    /// True if no block update raised the objective by more than `slack`.
    pub fn is_non_increasing(&self, slack: f64) -> bool {
        self.objective_sequence()
            .windows(2)
            .all(|w| w[1] <= w[0] + slack)
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.iterations.last().map(BcdIteration::objective)
    }
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn total_mse(
    config: &SystemConfig,
    channels: &ChannelSet,
    transmit: &[Complex64],
    beamformer: &[Complex64],
) -> Result<f64> {
    let sol = Solution {
        transmit_coeffs: transmit.to_vec(),
        beamformer: beamformer.to_vec(),
        positions: channels.positions.clone(),
    };
    Ok(mse_analytic(config, channels, &sol)?.total)
}

/// Full three-block descent from the standard start: `b_k = √P_k` and
/// uniformly spaced antennas.
pub fn bcd_solve(config: &SystemConfig, settings: &BcdSettings) -> Result<(Solution, BcdTrace)> {
    config.validate()?;
    let transmit: Vec<Complex64> = config
        .power_caps
        .iter()
        .map(|p| Complex64::new(p.sqrt(), 0.0))
        .collect();
    let positions = config.initial_positions()?;
    bcd_solve_from(config, settings, transmit, positions, true)
}

/// Beamformer/power alternation with the placement held fixed.
pub fn alternate_transceiver(
    config: &SystemConfig,
    settings: &BcdSettings,
    positions: AntennaPositions,
) -> Result<(Solution, BcdTrace)> {
    config.validate()?;
    let transmit: Vec<Complex64> = config
        .power_caps
        .iter()
        .map(|p| Complex64::new(p.sqrt(), 0.0))
        .collect();
    bcd_solve_from(config, settings, transmit, positions, false)
}

/// Block coordinate descent from a given start. Each outer iteration updates
/// the beamformer, then the transmit coefficients, then (optionally) the
/// placement, and stops once all three blocks move less than the tolerance.
pub fn bcd_solve_from(
    config: &SystemConfig,
    settings: &BcdSettings,
    mut transmit: Vec<Complex64>,
    positions: AntennaPositions,
    update_positions: bool,
) -> Result<(Solution, BcdTrace)> {
    settings.validate()?;
    check_len("transmit coefficients", config.num_users, transmit.len())?;
    let mut channels = build_channels(config, &positions)?;
    let mut beamformer = vec![Complex64::new(0.0, 0.0); config.num_antennas];
    let mut trace = BcdTrace::default();

    for iteration in 1..=settings.max_outer_iters {
        let m = solve_beamformer(config, &channels, &transmit)
            .map_err(|e| e.context(format!("beamformer update, iteration {iteration}")))?;
        let objective_after_beamformer = total_mse(config, &channels, &transmit, &m)?;

        let b = solve_power(config, &channels, &m)?;
        let objective_after_power = total_mse(config, &channels, &b, &m)?;

        let (delta_positions, bfgs_iterations) = if update_positions {
            let outcome = solve_positions(config, &b, &m, &channels.positions, settings)
                .map_err(|e| e.context(format!("placement update, iteration {iteration}")))?;
            let moved: f64 = outcome
                .positions
                .as_slice()
                .iter()
                .zip(channels.positions.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            if outcome.improved {
                channels = build_channels(config, &outcome.positions)?;
            }
            (moved, outcome.bfgs_iterations)
        } else {
            (0.0, 0)
        };
        let objective_after_positions = total_mse(config, &channels, &b, &m)?;

        let delta_beamformer = distance(&m, &beamformer);
        let delta_transmit = distance(&b, &transmit);
        beamformer = m;
        transmit = b;
        log::debug!(
            "bcd iteration {iteration}: mse {objective_after_positions:.6e}, |dm| {delta_beamformer:.2e}, |db| {delta_transmit:.2e}, |dx| {delta_positions:.2e}"
        );
        trace.iterations.push(BcdIteration {
            iteration,
            objective_after_beamformer,
            objective_after_power,
            objective_after_positions,
            delta_beamformer,
            delta_transmit,
            delta_positions,
            bfgs_iterations,
        });
        let tol = settings.outer_tolerance;
        if delta_beamformer < tol && delta_transmit < tol && delta_positions < tol {
            trace.converged = true;
            break;
        }
    }

    Ok((
        Solution {
            transmit_coeffs: transmit,
            beamformer,
            positions: channels.positions,
        },
        trace,
    ))
}
