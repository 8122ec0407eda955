//! Antenna placement for fixed transmit coefficients and receive beamformer.
//!
//! The placement objective
//!
//! ```text
//! f(x) = Σ_k |mᴴh̄_k(x) b_k − 1|² + Σ_k |b_k|² ψ_k θ_{k,0}² Σ_n |m_n x_n|²
//! ```
//!
//! is minimized over the feasible set `x_1 ≥ 0`, `x_N ≤ L`,
//! `x_n − x_{n−1} ≥ L0` with a log-barrier interior-point loop. Each barrier
//! stage minimizes `f(x) − μ Φ(x)` with BFGS, where `Φ` sums the logs of the
//! `N + 1` constraint slacks, then shrinks `μ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{check_feasible, slacks, AntennaPositions, SystemConfig, UserLink};
use crate::solvers::BcdSettings;

const ARMIJO_C1: f64 = 1e-4;
const BACKTRACK_SHRINK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 50;
/// A step may consume at most this fraction of any barrier slack.
const SLACK_FRACTION: f64 = 0.9;
const CURVATURE_MIN: f64 = 1e-12;

/// Placement objective with `b` and `m` frozen.
#[derive(Debug, Clone)]
pub struct PlacementProblem {
    links: Vec<UserLink>,
    transmit: Vec<Complex64>,
    beam_conj: Vec<Complex64>,
    beam_power: Vec<f64>,
    /// `Σ_k |b_k|² ψ_k θ_{k,0}²`
    csi_weight: f64,
    aperture: f64,
    min_spacing: f64,
}

impl PlacementProblem {
    pub fn new(
        config: &SystemConfig,
        transmit_coeffs: &[Complex64],
        beamformer: &[Complex64],
    ) -> Result<Self> {
        check_len(
            "transmit coefficients",
            config.num_users,
            transmit_coeffs.len(),
        )?;
        check_len("beamformer", config.num_antennas, beamformer.len())?;
        let links = config.links();
        let csi_weight = links
            .iter()
            .zip(transmit_coeffs)
            .map(|(l, b)| b.norm_sqr() * l.csi_weight())
            .sum();
        Ok(PlacementProblem {
            links,
            transmit: transmit_coeffs.to_vec(),
            beam_conj: beamformer.iter().map(|m| m.conj()).collect(),
            beam_power: beamformer.iter().map(|m| m.norm_sqr()).collect(),
            csi_weight,
            aperture: config.aperture_length,
            min_spacing: config.min_spacing,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.beam_conj.len()
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    fn csi_term(&self, xs: &[f64]) -> f64 {
        self.csi_weight
            * self
                .beam_power
                .iter()
                .zip(xs)
                .map(|(p, x)| p * x * x)
                .sum::<f64>()
    }

    /// `f(x)`; no feasibility check.
    pub fn objective(&self, xs: &[f64]) -> f64 {
        let mut total = self.csi_term(xs);
        for (link, b) in self.links.iter().zip(&self.transmit) {
            let projected: Complex64 = self
                .beam_conj
                .iter()
                .zip(xs)
                .map(|(mc, &x)| mc * link.steering(x))
                .sum();
            total += (projected * b - 1.0).norm_sqr();
        }
        total
    }

    /// `f(x)` and writes `∇f(x)` into `grad`.
    pub fn value_and_gradient(&self, xs: &[f64], grad: &mut [f64]) -> f64 {
        let n = xs.len();
        let mut total = self.csi_term(xs);
        for ((g, p), &x) in grad.iter_mut().zip(&self.beam_power).zip(xs) {
            *g = 2.0 * self.csi_weight * p * x;
        }
        let mut terms = vec![Complex64::new(0.0, 0.0); n];
        for (link, b) in self.links.iter().zip(&self.transmit) {
            let mut projected = Complex64::new(0.0, 0.0);
            for ((t, mc), &x) in terms.iter_mut().zip(&self.beam_conj).zip(xs) {
                *t = mc * link.steering(x) * b;
                projected += *t;
            }
            let residual = projected - 1.0;
            total += residual.norm_sqr();
            // ∂g_k/∂x_n = j·κ_k·t_kn
            let weight = residual.conj() * Complex64::new(0.0, link.spatial_frequency);
            for (g, t) in grad.iter_mut().zip(&terms) {
                *g += 2.0 * (weight * t).re;
            }
        }
        total
    }

    /// `Φ(x)`, or `None` when any slack is not strictly positive.
    pub fn barrier(&self, xs: &[f64]) -> Option<f64> {
        barrier_of(xs, self.aperture, self.min_spacing)
    }

    fn barrier_gradient(&self, xs: &[f64], grad: &mut [f64]) {
        let n = xs.len();
        grad.iter_mut().for_each(|g| *g = 0.0);
        grad[0] += 1.0 / xs[0];
        for i in 1..n {
            let inv = 1.0 / (xs[i] - xs[i - 1] - self.min_spacing);
            grad[i] += inv;
            grad[i - 1] -= inv;
        }
        grad[n - 1] -= 1.0 / (self.aperture - xs[n - 1]);
    }

    /// `f(x) − μΦ(x)` and its gradient; `None` outside the strict interior.
    fn penalized(&self, xs: &[f64], mu: f64, grad: &mut [f64], scratch: &mut [f64]) -> Option<f64> {
        let phi = self.barrier(xs)?;
        let f = self.value_and_gradient(xs, grad);
        self.barrier_gradient(xs, scratch);
        for (g, b) in grad.iter_mut().zip(scratch.iter()) {
            *g -= mu * b;
        }
        Some(f - mu * phi)
    }

    fn penalized_value(&self, xs: &[f64], mu: f64) -> Option<f64> {
        let phi = self.barrier(xs)?;
        Some(self.objective(xs) - mu * phi)
    }
}

fn barrier_of(xs: &[f64], aperture: f64, min_spacing: f64) -> Option<f64> {
    let mut phi = 0.0;
    for s in slacks(xs, aperture, min_spacing) {
        if !(s > 0.0) {
            return None;
        }
        phi += s.ln();
    }
    Some(phi)
}

/// `Φ(x) = log x_1 + log(L − x_N) + Σ_{n≥2} log(x_n − x_{n−1} − L0)`.
pub fn barrier_value(positions: &[f64], aperture: f64, min_spacing: f64) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::Domain("no antenna positions".into()));
    }
    barrier_of(positions, aperture, min_spacing).ok_or_else(|| {
        let s = slacks(positions, aperture, min_spacing);
        let (i, v) = s
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0))
            .map(|(i, v)| (i, *v))
            .unwrap_or((0, f64::NAN));
        Error::Domain(format!(
            "slack {i} is {v}, the barrier needs every slack > 0"
        ))
    })
}

fn checked_problem(
    config: &SystemConfig,
    transmit_coeffs: &[Complex64],
    beamformer: &[Complex64],
    positions: &AntennaPositions,
) -> Result<PlacementProblem> {
    check_feasible(
        positions.as_slice(),
        config.num_antennas,
        config.aperture_length,
        config.min_spacing,
    )
    .map_err(Error::Infeasible)?;
    PlacementProblem::new(config, transmit_coeffs, beamformer)
}

/// Placement objective `f(x)` (the MSE without `1/K²` and without noise).
pub fn placement_objective(
    config: &SystemConfig,
    transmit_coeffs: &[Complex64],
    beamformer: &[Complex64],
    positions: &AntennaPositions,
) -> Result<f64> {
    Ok(
        checked_problem(config, transmit_coeffs, beamformer, positions)?
            .objective(positions.as_slice()),
    )
}

/// Analytic `∇f(x)`.
pub fn placement_gradient(
    config: &SystemConfig,
    transmit_coeffs: &[Complex64],
    beamformer: &[Complex64],
    positions: &AntennaPositions,
) -> Result<Vec<f64>> {
    let problem = checked_problem(config, transmit_coeffs, beamformer, positions)?;
    let mut grad = vec![0.0; positions.len()];
    problem.value_and_gradient(positions.as_slice(), &mut grad);
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub positions: AntennaPositions,
    pub objective: f64,
    pub initial_objective: f64,
    pub barrier_stages: usize,
    pub bfgs_iterations: usize,
    /// False when no stage improved on the starting placement.
    pub improved: bool,
}

fn barrier_schedule(settings: &BcdSettings) -> Vec<f64> {
    let mut mus = Vec::new();
    let mut mu = settings.barrier_mu_init;
    // Relative slack so that e.g. 1/10^8 still counts as reaching a 1e-8 floor.
    while mu >= settings.barrier_mu_floor * (1.0 - 1e-9) {
        mus.push(mu);
        mu /= settings.barrier_mu_shrink;
    }
    mus
}

/// Largest step along `p` keeping every slack at least `1 − SLACK_FRACTION` of its value.
fn max_feasible_step(xs: &[f64], p: &[f64], aperture: f64, min_spacing: f64) -> f64 {
    let n = xs.len();
    let s = slacks(xs, aperture, min_spacing);
    let mut ds = Vec::with_capacity(n + 1);
    ds.push(p[0]);
    ds.extend((1..n).map(|i| p[i] - p[i - 1]));
    ds.push(-p[n - 1]);
    s.iter()
        .zip(&ds)
        .filter(|(_, d)| **d < 0.0)
        .map(|(s, d)| SLACK_FRACTION * s / -d)
        .fold(1.0, f64::min)
}

struct StageResult {
    xs: Vec<f64>,
    iterations: usize,
}

/// BFGS on `f − μΦ` from a strictly feasible start.
fn minimize_stage(
    problem: &PlacementProblem,
    start: &[f64],
    mu: f64,
    settings: &BcdSettings,
) -> StageResult {
    let n = start.len();
    let mut x = DVector::from_column_slice(start);
    let mut g = DVector::zeros(n);
    let mut scratch = vec![0.0; n];
    let mut value = problem
        .penalized(x.as_slice(), mu, g.as_mut_slice(), &mut scratch)
        .expect("stage starts strictly feasible");
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut g_new = DVector::zeros(n);
    let mut iterations = 0;

    while iterations < settings.max_bfgs_iters {
        if g.norm() < settings.grad_tolerance {
            break;
        }
        iterations += 1;
        let mut p = -(&h * &g);
        let mut slope = p.dot(&g);
        if !(slope < 0.0) {
            h.fill_with_identity();
            p = -g.clone();
            slope = p.dot(&g);
        }

        let mut step = max_feasible_step(
            x.as_slice(),
            p.as_slice(),
            problem.aperture,
            problem.min_spacing,
        );
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &p * step;
            if let Some(v) = problem.penalized_value(trial.as_slice(), mu) {
                if v <= value + ARMIJO_C1 * step * slope {
                    accepted = Some((trial, v));
                    break;
                }
            }
            step *= BACKTRACK_SHRINK;
        }
        let Some((x_new, v_new)) = accepted else {
            if h.is_identity(0.0) {
                break;
            }
            h.fill_with_identity();
            continue;
        };

        problem
            .penalized(x_new.as_slice(), mu, g_new.as_mut_slice(), &mut scratch)
            .expect("accepted trial is strictly feasible");
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > CURVATURE_MIN {
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h = (&h + h.transpose()) * 0.5;
        } else {
            h.fill_with_identity();
        }
        debug_assert!((&h - h.transpose()).amax() <= 1e-10 * (1.0 + h.amax()));

        let step_norm = s.norm();
        x = x_new;
        value = v_new;
        std::mem::swap(&mut g, &mut g_new);
        if step_norm < settings.step_tolerance {
            break;
        }
    }
    StageResult {
        xs: x.as_slice().to_vec(),
        iterations,
    }
}

/// Interior-point placement update.
///
/// Runs one BFGS stage per barrier weight `μ = μ0, μ0/τ, …` down to the floor,
/// warm-starting each stage from the previous one. The returned placement is
/// the stage endpoint with the lowest `f`, or the start if none improves on it.
pub fn solve_positions(
    config: &SystemConfig,
    transmit_coeffs: &[Complex64],
    beamformer: &[Complex64],
    initial: &AntennaPositions,
    settings: &BcdSettings,
) -> Result<PlacementOutcome> {
    settings.validate()?;
    let problem = checked_problem(config, transmit_coeffs, beamformer, initial)?;
    if !initial.is_strictly_feasible(config.aperture_length, config.min_spacing) {
        return Err(Error::Domain(
            "placement must start strictly inside the feasible region".into(),
        ));
    }
    let initial_objective = problem.objective(initial.as_slice());
    let mut best = (initial_objective, initial.as_slice().to_vec());
    let mut current = initial.as_slice().to_vec();
    let mut total_iterations = 0;
    let schedule = barrier_schedule(settings);
    for &mu in &schedule {
        let stage = minimize_stage(&problem, &current, mu, settings);
        total_iterations += stage.iterations;
        current = stage.xs;
        let f = problem.objective(&current);
        if !f.is_finite() {
            return Err(Error::Numerical(format!(
                "placement objective became {f} at mu = {mu}"
            )));
        }
        if f < best.0 {
            best = (f, current.clone());
        }
    }
    let improved = best.0 < initial_objective;
    let positions = if improved {
        AntennaPositions::new(best.1, config)?
    } else {
        initial.clone()
    };
    Ok(PlacementOutcome {
        positions,
        objective: best.0,
        initial_objective,
        barrier_stages: schedule.len(),
        bfgs_iterations: total_iterations,
        improved,
    })
}
