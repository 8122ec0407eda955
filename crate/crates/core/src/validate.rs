//! Self-check suite comparing the solvers against the reference oracles.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::model::build_channels;
use crate::objective::{mse_analytic, mse_monte_carlo};
use crate::oracle::{
    beamformer_gradient_fd, central_difference, placement_value, power_grid_search,
    power_subproblem_value, random_instance, random_transmit, two_antenna_grid_min,
};
use crate::seeding::derive_seed;
use crate::solvers::{
    bcd_solve, placement_gradient, solve_beamformer, solve_positions, solve_power, BcdSettings,
};
use crate::Solution;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, result: Result<(bool, String)>) -> CheckOutcome {
    match result {
        Ok((passed, detail)) => CheckOutcome {
            name,
            passed,
            detail,
        },
        Err(e) => CheckOutcome {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Run every oracle check with instances derived from `seed`.
pub fn run_validation(seed: u64) -> Vec<CheckOutcome> {
    vec![
        outcome("mse_monte_carlo_agreement", check_monte_carlo(seed)),
        outcome("power_grid_optimality", check_power(seed)),
        outcome("beamformer_stationarity", check_beamformer(seed)),
        outcome("placement_gradient_fd", check_gradient(seed)),
        outcome("placement_local_grid", check_placement_grid(seed)),
        outcome("bcd_monotonicity", check_bcd(seed)),
    ]
}

/// Beamformer from the closed form for random transmit coefficients.
fn solved_instance(
    seed: u64,
    k: usize,
    n: usize,
    theta0: f64,
) -> Result<(crate::SystemConfig, crate::ChannelSet, Solution)> {
    let (cfg, ch, mut rng) = random_instance(seed, k, n, 8.0, theta0)?;
    let b = random_transmit(&cfg, &mut rng);
    let m = solve_beamformer(&cfg, &ch, &b)?;
    let sol = Solution {
        transmit_coeffs: b,
        beamformer: m,
        positions: ch.positions.clone(),
    };
    Ok((cfg, ch, sol))
}

fn check_monte_carlo(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for (i, theta0) in [0.1, 0.2].into_iter().enumerate() {
        let (cfg, ch, sol) = solved_instance(derive_seed(seed, &[1, i as u64]), 10, 8, theta0)?;
        let exact = mse_analytic(&cfg, &ch, &sol)?.total;
        let mc = mse_monte_carlo(
            &cfg,
            &ch,
            &sol,
            1_000_000,
            derive_seed(seed, &[2, i as u64]),
        )?;
        worst = worst.max((mc - exact).abs() / exact);
    }
    Ok((
        worst < 0.01,
        format!("worst relative error {worst:.2e} (limit 1e-2)"),
    ))
}

fn check_power(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..5u64 {
        let (cfg, ch, mut rng) = random_instance(derive_seed(seed, &[3, i]), 10, 8, 8.0, 0.15)?;
        let b = random_transmit(&cfg, &mut rng);
        let m = solve_beamformer(&cfg, &ch, &b)?;
        let closed = solve_power(&cfg, &ch, &m)?;
        for (k, bk) in closed.iter().enumerate() {
            let phase = -ch.project(k, &m).arg();
            let (_, grid_best, _) = power_grid_search(&cfg, &ch, &m, k, phase, 100_000);
            let closed_value = power_subproblem_value(&cfg, &ch, &m, k, *bk);
            worst = worst.max(closed_value - grid_best);
            ok &= closed_value <= grid_best + 1e-12 && bk.norm_sqr() <= cfg.power_caps[k] + 1e-12;
        }
    }
    Ok((
        ok,
        format!("closed form minus grid minimum, worst {worst:.2e} (limit 1e-12)"),
    ))
}

fn check_beamformer(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let (cfg, ch, sol) = solved_instance(derive_seed(seed, &[4, i]), 10, 8, 0.2)?;
        let grad = beamformer_gradient_fd(&cfg, &ch, &sol, 1e-6)?;
        let zero = Solution {
            beamformer: vec![Complex64::new(0.0, 0.0); 8],
            ..sol.clone()
        };
        let scale = norm(&beamformer_gradient_fd(&cfg, &ch, &zero, 1e-6)?);
        worst = worst.max(norm(&grad) / (1.0 + scale));
    }
    Ok((
        worst < 1e-6,
        format!("worst scaled gradient norm {worst:.2e} (limit 1e-6)"),
    ))
}

fn check_gradient(seed: u64) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let (cfg, ch, sol) = solved_instance(derive_seed(seed, &[5, i]), 10, 8, 0.2)?;
        let analytic =
            placement_gradient(&cfg, &sol.transmit_coeffs, &sol.beamformer, &ch.positions)?;
        let fd = central_difference(
            |x| placement_value(&cfg, &sol.transmit_coeffs, &sol.beamformer, x),
            ch.positions.as_slice(),
            1e-6,
        );
        worst = worst.max(max_relative_error(&analytic, &fd));
    }
    Ok((
        worst < 1e-5,
        format!("worst componentwise relative error {worst:.2e} (limit 1e-5)"),
    ))
}

/// Two-antenna placements against a fine grid in a box around the solver's
/// output (local optimality), with the gap to the global grid reported too.
fn check_placement_grid(seed: u64) -> Result<(bool, String)> {
    const HALF_WIDTH: f64 = 0.2;
    const POINTS: usize = 41;
    let settings = BcdSettings::default();
    let mut worst_local = f64::NEG_INFINITY;
    let mut worst_global = f64::NEG_INFINITY;
    for i in 0..3u64 {
        let (cfg, ch, sol) = solved_instance(derive_seed(seed, &[6, i]), 4, 2, 0.1)?;
        let (b, m) = (&sol.transmit_coeffs, &sol.beamformer);
        let out = solve_positions(&cfg, b, m, &ch.positions, &settings)?;
        let x = out.positions.as_slice();
        let step = 2.0 * HALF_WIDTH / (POINTS - 1) as f64;
        let mut local = f64::INFINITY;
        for p in 0..POINTS {
            for q in 0..POINTS {
                let probe = [
                    x[0] - HALF_WIDTH + step * p as f64,
                    x[1] - HALF_WIDTH + step * q as f64,
                ];
                if probe[0] > 0.0
                    && probe[1] < cfg.aperture_length
                    && probe[1] - probe[0] > cfg.min_spacing
                {
                    local = local.min(placement_value(&cfg, b, m, &probe));
                }
            }
        }
        let (global, _) = two_antenna_grid_min(&cfg, b, m, 200);
        worst_local = worst_local.max(out.objective - local);
        worst_global = worst_global.max(out.objective - global);
    }
    Ok((
        worst_local <= 1e-9,
        format!(
            "solver minus local grid minimum, worst {worst_local:.2e} (limit 1e-9); minus global 200x200 grid minimum, worst {worst_global:.2e}"
        ),
    ))
}

fn check_bcd(seed: u64) -> Result<(bool, String)> {
    let settings = BcdSettings::default();
    let mut ok = true;
    let mut iters = Vec::new();
    let mut converged = 0;
    for i in 0..3u64 {
        let (cfg, _, _) = random_instance(derive_seed(seed, &[7, i]), 10, 8, 8.0, 0.1)?;
        let (sol, trace) = bcd_solve(&cfg, &settings)?;
        let ch = build_channels(&cfg, &sol.positions)?;
        mse_analytic(&cfg, &ch, &sol)?;
        ok &= trace.is_non_increasing(1e-10)
            && sol
                .positions
                .is_strictly_feasible(cfg.aperture_length, cfg.min_spacing);
        converged += trace.converged as usize;
        iters.push(trace.iterations.len());
    }
    Ok((
        ok,
        format!("objective non-increasing and placement feasible; converged {converged}/3, outer iterations {iters:?}"),
    ))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max_i |a_i − b_i| / max(|a_i|, |b_i|)`, with exact agreement counted as zero.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            if d == 0.0 {
                0.0
            } else {
                d / x.abs().max(y.abs())
            }
        })
        .fold(0.0, f64::max)
}
