//! Brute-force and finite-difference reference computations.
//!
//! Nothing here calls the closed-form or quasi-Newton solvers; these routines
//! evaluate objectives directly and search or differentiate numerically, so
//! they can be used to check the solvers.

use num_complex::Complex64;
use rand::Rng;

use crate::error::Result;
use crate::model::{
    build_channels, AntennaPositions, ChannelSet, GeometryRanges, SystemConfig, UserGeometry,
};
use crate::objective::mse_analytic;
use crate::seeding::{rng_from_seed, SimRng};
use crate::Solution;

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Per-user power subproblem: `|mᴴh̄_k b − 1|² + |b|² ψ_k θ_{k,0}² Σ_n |m_n x_n|²`,
/// evaluated term by term.
pub fn power_subproblem_value(
    config: &SystemConfig,
    channels: &ChannelSet,
    beamformer: &[Complex64],
    user: usize,
    b: Complex64,
) -> f64 {
    let mut projected = Complex64::new(0.0, 0.0);
    for (m, h) in beamformer.iter().zip(&channels.estimated_channels[user]) {
        projected += m.conj() * h;
    }
    let mut csi = 0.0;
    for (m, x) in beamformer.iter().zip(channels.positions.as_slice()) {
        csi += (m * x).norm_sqr();
    }
    let w = config.uncertainty_widths[user];
    (projected * b - 1.0).norm_sqr()
        + b.norm_sqr() * channels.uncertainty_coeffs[user] * w * w * csi
}

/// Grid search over `|b| ∈ [0, √P_k]` with `points` samples, phase fixed to `phase`.
/// Returns `(best magnitude, best value, grid step)`.
pub fn power_grid_search(
    config: &SystemConfig,
    channels: &ChannelSet,
    beamformer: &[Complex64],
    user: usize,
    phase: f64,
    points: usize,
) -> (f64, f64, f64) {
    let cap = config.power_caps[user].sqrt();
    let step = cap / (points - 1) as f64;
    let rot = Complex64::from_polar(1.0, phase);
    (0..points)
        .map(|i| {
            let t = step * i as f64;
            (
                t,
                power_subproblem_value(config, channels, beamformer, user, rot * t),
            )
        })
        .fold((0.0, f64::INFINITY, step), |best, (t, v)| {
            if v < best.1 {
                (t, v, step)
            } else {
                best
            }
        })
}

/// Real-coordinate gradient of the total MSE with respect to the beamformer
/// (`[Re m_1, Im m_1, …]`), by central differences.
pub fn beamformer_gradient_fd(
    config: &SystemConfig,
    channels: &ChannelSet,
    sol: &Solution,
    h: f64,
) -> Result<Vec<f64>> {
    let flat: Vec<f64> = sol.beamformer.iter().flat_map(|m| [m.re, m.im]).collect();
    let mut trial = sol.clone();
    let mut failure = None;
    let grad = central_difference(
        |v| {
            for (i, m) in trial.beamformer.iter_mut().enumerate() {
                *m = Complex64::new(v[2 * i], v[2 * i + 1]);
            }
            match mse_analytic(config, channels, &trial) {
                Ok(b) => b.total,
                Err(e) => {
                    failure = Some(e);
                    f64::NAN
                }
            }
        },
        &flat,
        h,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(grad),
    }
}

/// Direct evaluation of the placement objective from rebuilt channels.
pub fn placement_value(
    config: &SystemConfig,
    transmit: &[Complex64],
    beamformer: &[Complex64],
    xs: &[f64],
) -> f64 {
    let kw = config.wavenumber();
    let mut total = 0.0;
    for k in 0..config.num_users {
        let gain = config.user_distances[k]
            .powf(-config.path_loss_exponent)
            .sqrt();
        let phase_rate = kw * config.nominal_angles[k].cos();
        let psi = (kw * gain * config.nominal_angles[k].sin()).powi(2) / 3.0;
        let w = config.uncertainty_widths[k];
        let mut g = Complex64::new(0.0, 0.0);
        let mut csi = 0.0;
        for (m, &x) in beamformer.iter().zip(xs) {
            g += m.conj() * Complex64::from_polar(gain, phase_rate * x);
            csi += m.norm_sqr() * x * x;
        }
        total += (g * transmit[k] - 1.0).norm_sqr() + transmit[k].norm_sqr() * psi * w * w * csi;
    }
    total
}

/// Best placement objective on a `points × points` grid over `[0, L]²` for
/// two antennas, restricted to feasible pairs. Returns `(value, [x_1, x_2])`.
pub fn two_antenna_grid_min(
    config: &SystemConfig,
    transmit: &[Complex64],
    beamformer: &[Complex64],
    points: usize,
) -> (f64, [f64; 2]) {
    assert_eq!(config.num_antennas, 2, "grid oracle is for two antennas");
    let l = config.aperture_length;
    let step = l / (points - 1) as f64;
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for i in 0..points {
        for j in 0..points {
            let x = [step * i as f64, step * j as f64];
            if x[1] - x[0] < config.min_spacing {
                continue;
            }
            let v = placement_value(config, transmit, beamformer, &x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    best
}

/// Uniformly random strictly feasible placement: the `N + 1` slacks are a
/// random split of the free length `L − (N−1)·L0`.
pub fn random_feasible_positions<R: Rng + ?Sized>(
    config: &SystemConfig,
    rng: &mut R,
) -> Result<AntennaPositions> {
    let n = config.num_antennas;
    let free = config.aperture_length - (n - 1) as f64 * config.min_spacing;
    let weights: Vec<f64> = (0..=n)
        .map(|_| -rng.random_range(1e-6f64..1.0).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut xs = Vec::with_capacity(n);
    let mut x = weights[0] / total * free;
    xs.push(x);
    for w in &weights[1..n] {
        x += config.min_spacing + w / total * free;
        xs.push(x);
    }
    AntennaPositions::new(xs, config)
}

/// Scenario with seeded user geometry, equal power caps from `snr_db` and
/// uniform uncertainty width `theta0`.
pub fn random_config(
    rng: &mut SimRng,
    num_users: usize,
    num_antennas: usize,
    aperture: f64,
    theta0: f64,
    snr_db: f64,
) -> SystemConfig {
    let geometry = UserGeometry::sample(num_users, &GeometryRanges::default(), rng);
    SystemConfig {
        num_users,
        num_antennas,
        aperture_length: aperture,
        min_spacing: 0.5,
        wavelength: 1.0,
        path_loss_exponent: 2.0,
        noise_power: 1.0,
        power_caps: vec![10f64.powf(snr_db / 10.0); num_users],
        uncertainty_widths: vec![theta0; num_users],
        user_distances: geometry.distances,
        nominal_angles: geometry.angles,
    }
}

/// Random transmit coefficients with `|b_k|² ≤ P_k` and uniform phases.
pub fn random_transmit<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Vec<Complex64> {
    config
        .power_caps
        .iter()
        .map(|p| {
            let r = p.sqrt() * rng.random_range(0.2..1.0);
            Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

/// Random complex vector with entries of magnitude up to `scale`.
pub fn random_complex<R: Rng + ?Sized>(len: usize, scale: f64, rng: &mut R) -> Vec<Complex64> {
    (0..len)
        .map(|_| {
            Complex64::new(
                rng.random_range(-scale..scale),
                rng.random_range(-scale..scale),
            )
        })
        .collect()
}

/// A seeded configuration with random feasible placement and its channels.
pub fn random_instance(
    seed: u64,
    num_users: usize,
    num_antennas: usize,
    aperture: f64,
    theta0: f64,
) -> Result<(SystemConfig, ChannelSet, SimRng)> {
    let mut rng = rng_from_seed(seed);
    let config = random_config(&mut rng, num_users, num_antennas, aperture, theta0, 10.0);
    let positions = random_feasible_positions(&config, &mut rng)?;
    let channels = build_channels(&config, &positions)?;
    Ok((config, channels, rng))
}
