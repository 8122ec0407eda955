//! The robust aggregation MSE: closed form and a Monte-Carlo estimate.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{ChannelSampler, ChannelSet, PerturbationModel, SystemConfig};
use crate::seeding::{derive_seed, rng_from_seed};
use crate::Solution;

/// The three additive components of the aggregation MSE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseBreakdown {
    pub misalignment: f64,
    pub csi_error: f64,
    pub noise: f64,
    pub total: f64,
}

fn check_dims(config: &SystemConfig, channels: &ChannelSet, sol: &Solution) -> Result<()> {
    check_len("channel rows", config.num_users, channels.num_users())?;
    check_len(
        "channel columns",
        config.num_antennas,
        channels.num_antennas(),
    )?;
    check_len(
        "transmit coefficients",
        config.num_users,
        sol.transmit_coeffs.len(),
    )?;
    check_len("beamformer", config.num_antennas, sol.beamformer.len())?;
    check_len("positions", config.num_antennas, sol.positions.len())?;
    if channels.positions != sol.positions {
        return Err(Error::InvalidConfig(
            "channel set was built for different antenna positions than the solution".into(),
        ));
    }
    Ok(())
}

/// Closed-form MSE including the `1/K²` factor.
pub fn mse_analytic(
    config: &SystemConfig,
    channels: &ChannelSet,
    sol: &Solution,
) -> Result<MseBreakdown> {
    check_dims(config, channels, sol)?;
    let k2 = (config.num_users * config.num_users) as f64;
    let m = &sol.beamformer;
    let xs = sol.positions.as_slice();
    // Σ_n |m_n x_n|²
    let weighted_gain: f64 = m.iter().zip(xs).map(|(mn, x)| mn.norm_sqr() * x * x).sum();

    let mut misalignment = 0.0;
    let mut csi_error = 0.0;
    for (k, b) in sol.transmit_coeffs.iter().enumerate() {
        misalignment += (channels.project(k, m) * b - 1.0).norm_sqr();
        let width = config.uncertainty_widths[k];
        csi_error += b.norm_sqr() * channels.uncertainty_coeffs[k] * width * width * weighted_gain;
    }
    let noise = m.iter().map(|v| v.norm_sqr()).sum::<f64>() * config.noise_power / k2;
    let misalignment = misalignment / k2;
    let csi_error = csi_error / k2;
    Ok(MseBreakdown {
        misalignment,
        csi_error,
        noise,
        total: misalignment + csi_error + noise,
    })
}

/// Samples per independently seeded Monte-Carlo chunk.
pub const MC_CHUNK: usize = 1 << 14;

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Monte-Carlo estimate of `E|ŝ - s|²` with per-antenna linearized angle errors,
/// the error model whose covariance matches [`mse_analytic`].
pub fn mse_monte_carlo(
    config: &SystemConfig,
    channels: &ChannelSet,
    sol: &Solution,
    num_samples: usize,
    seed: u64,
) -> Result<f64> {
    mse_monte_carlo_with(
        config,
        channels,
        sol,
        num_samples,
        seed,
        PerturbationModel::PerAntenna,
    )
}

/// Monte-Carlo estimate of the aggregation MSE under a chosen channel error model.
///
/// Each sample draws symbols `s_k ~ CN(0, 1)`, realized channels `h_k`, and
/// noise `z ~ CN(0, σ²I)`, forms `y = Σ h_k b_k s_k + z`, `ŝ = mᴴy/K` and
/// `s = Σ s_k / K`, and averages `|ŝ - s|²`. Samples are split into fixed
/// chunks of [`MC_CHUNK`] with seeds derived from `(seed, chunk)`, so the
/// result does not depend on the number of worker threads.
pub fn mse_monte_carlo_with(
    config: &SystemConfig,
    channels: &ChannelSet,
    sol: &Solution,
    num_samples: usize,
    seed: u64,
    model: PerturbationModel,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::InvalidConfig(
            "num_samples must be at least 1".into(),
        ));
    }
    check_dims(config, channels, sol)?;
    let num_chunks = num_samples.div_ceil(MC_CHUNK);
    let chunk_sums: Vec<f64> = (0..num_chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(num_samples - c * MC_CHUNK);
            let mut rng = rng_from_seed(derive_seed(seed, &[c as u64]));
            let sampler = ChannelSampler::new(config, channels);
            let mut scratch = Scratch::new(channels);
            (0..len)
                .map(|_| squared_error_sample(config, &sampler, sol, model, &mut rng, &mut scratch))
                .sum::<f64>()
        })
        .collect();
    Ok(chunk_sums.iter().sum::<f64>() / num_samples as f64)
}

struct Scratch {
    symbols: Vec<Complex64>,
    channels: Vec<Vec<Complex64>>,
    received: Vec<Complex64>,
}

impl Scratch {
    fn new(channels: &ChannelSet) -> Self {
        Scratch {
            symbols: vec![Complex64::new(0.0, 0.0); channels.num_users()],
            channels: channels.estimated_channels.clone(),
            received: vec![Complex64::new(0.0, 0.0); channels.num_antennas()],
        }
    }
}

fn squared_error_sample<R: Rng + ?Sized>(
    config: &SystemConfig,
    sampler: &ChannelSampler<'_>,
    sol: &Solution,
    model: PerturbationModel,
    rng: &mut R,
    scratch: &mut Scratch,
) -> f64 {
    let k = config.num_users as f64;
    for s in scratch.symbols.iter_mut() {
        *s = complex_normal(rng, 1.0);
    }
    sampler.sample_into(model, rng, &mut scratch.channels);
    for yn in scratch.received.iter_mut() {
        *yn = complex_normal(rng, config.noise_power);
    }
    for ((hk, b), s) in scratch
        .channels
        .iter()
        .zip(&sol.transmit_coeffs)
        .zip(&scratch.symbols)
    {
        let tx = b * s;
        for (yn, hkn) in scratch.received.iter_mut().zip(hk) {
            *yn += hkn * tx;
        }
    }
    let estimate: Complex64 = sol
        .beamformer
        .iter()
        .zip(&scratch.received)
        .map(|(m, v)| m.conj() * v)
        .sum::<Complex64>()
        / k;
    let target: Complex64 = scratch.symbols.iter().sum::<Complex64>() / k;
    (estimate - target).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_channels, AntennaPositions};

    fn scalar_config(noise: f64, width: f64) -> SystemConfig {
        SystemConfig {
            num_users: 1,
            num_antennas: 1,
            aperture_length: 8.0,
            min_spacing: 0.5,
            wavelength: 1.0,
            path_loss_exponent: 2.0,
            noise_power: noise,
            power_caps: vec![1.0],
            uncertainty_widths: vec![width],
            user_distances: vec![1.0],
            nominal_angles: vec![std::f64::consts::FRAC_PI_2],
        }
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_beamformer_leaves_unit_misalignment_per_user() {
        let mut cfg = scalar_config(1.0, 0.1);
        cfg.num_users = 4;
        cfg.num_antennas = 2;
        for v in [
            &mut cfg.power_caps,
            &mut cfg.uncertainty_widths,
            &mut cfg.user_distances,
        ] {
            let first = v[0];
            *v = vec![first; 4];
        }
        cfg.nominal_angles = vec![0.7, 1.1, 1.9, 2.5];
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let sol = Solution {
            transmit_coeffs: vec![c(0.3, 0.2), c(1.0, 0.0), c(0.0, -0.5), c(0.1, 0.1)],
            beamformer: vec![c(0.0, 0.0); 2],
            positions: pos,
        };
        let mse = mse_analytic(&cfg, &ch, &sol).unwrap();
        assert_eq!(mse.misalignment, 0.25);
        assert_eq!(mse.csi_error, 0.0);
        assert_eq!(mse.noise, 0.0);
        assert_eq!(mse.total, 0.25);
    }

    #[test]
    fn perfect_alignment_leaves_only_noise() {
        let cfg = scalar_config(0.5, 0.0);
        // x = 0 with broadside user: h̄ = 1.
        let pos = AntennaPositions::new(vec![0.0], &cfg).unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let sol = Solution {
            transmit_coeffs: vec![c(1.0, 0.0)],
            beamformer: vec![c(1.0, 0.0)],
            positions: pos,
        };
        let mse = mse_analytic(&cfg, &ch, &sol).unwrap();
        assert!((mse.total - 0.5).abs() < 1e-15);
        assert!(mse.misalignment.abs() < 1e-30);
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let cfg = scalar_config(1.0, 0.0);
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let sol = Solution {
            transmit_coeffs: vec![c(1.0, 0.0); 2],
            beamformer: vec![c(1.0, 0.0)],
            positions: pos,
        };
        assert!(matches!(
            mse_analytic(&cfg, &ch, &sol),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn error_free_aggregation_has_zero_sample_error() {
        let cfg = scalar_config(1e-300, 0.0);
        let pos = AntennaPositions::new(vec![0.0], &cfg).unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let mut cfg = cfg;
        cfg.noise_power = 0.0;
        let sol = Solution {
            transmit_coeffs: vec![c(1.0, 0.0)],
            beamformer: vec![c(1.0, 0.0)],
            positions: pos,
        };
        let est = mse_monte_carlo(&cfg, &ch, &sol, 5000, 1).unwrap();
        assert_eq!(est, 0.0);
    }

    #[test]
    fn silent_receiver_estimates_signal_variance() {
        let cfg = scalar_config(1.0, 0.0);
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let sol = Solution {
            transmit_coeffs: vec![c(0.0, 0.0)],
            beamformer: vec![c(0.0, 0.0)],
            positions: pos,
        };
        let n = 200_000;
        let est = mse_monte_carlo(&cfg, &ch, &sol, n, 5).unwrap();
        // |s|² ~ Exp(1): standard deviation 1.
        assert!((est - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{est}");
    }

    #[test]
    fn chunked_estimate_is_reproducible() {
        let cfg = scalar_config(1.0, 0.2);
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let sol = Solution {
            transmit_coeffs: vec![c(0.7, 0.1)],
            beamformer: vec![c(0.4, -0.3)],
            positions: pos,
        };
        let a = mse_monte_carlo(&cfg, &ch, &sol, 3 * MC_CHUNK + 17, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| mse_monte_carlo(&cfg, &ch, &sol, 3 * MC_CHUNK + 17, 9).unwrap());
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(mse_monte_carlo(&cfg, &ch, &sol, 0, 9).is_err());
    }
}
