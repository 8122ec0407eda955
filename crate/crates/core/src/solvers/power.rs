//! Closed-form transmit coefficients for a fixed receiver and placement.

use num_complex::Complex64;

use crate::error::{check_len, Result};
use crate::model::{ChannelSet, SystemConfig};

/// Per-user optimal transmit coefficient.
///
/// The magnitude is `min(√P_k, |mᴴh̄_k| / (|mᴴh̄_k|² + ψ_k θ_{k,0}² Σ_n |m_n x_n|²))`
/// and the phase cancels `arg(mᴴh̄_k)` so the aligned signal is real-positive.
pub fn solve_power(
    config: &SystemConfig,
    channels: &ChannelSet,
    beamformer: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_len("beamformer", config.num_antennas, beamformer.len())?;
    check_len("channel rows", config.num_users, channels.num_users())?;
    let xs = channels.positions.as_slice();
    let weighted_gain: f64 = beamformer
        .iter()
        .zip(xs)
        .map(|(m, x)| m.norm_sqr() * x * x)
        .sum();
    Ok((0..config.num_users)
        .map(|k| {
            let width = config.uncertainty_widths[k];
            let gain = channels.project(k, beamformer);
            optimal_coefficient(
                gain,
                channels.uncertainty_coeffs[k] * width * width * weighted_gain,
                config.power_caps[k],
            )
        })
        .collect())
}

/// Minimizer of `|g·b − 1|² + c·|b|²` subject to `|b|² ≤ cap`.
pub fn optimal_coefficient(gain: Complex64, csi_penalty: f64, cap: f64) -> Complex64 {
    let magnitude = gain.norm();
    let denom = magnitude * magnitude + csi_penalty;
    if denom <= 0.0 {
        // g = 0 and no penalty: the objective is constant in b.
        return Complex64::new(0.0, 0.0);
    }
    let t = (magnitude / denom).min(cap.sqrt());
    if magnitude > 0.0 {
        gain.conj() / magnitude * t
    } else {
        Complex64::new(0.0, 0.0)
    }
}
