//! Receive beamformer minimizing the MSE for fixed transmit coefficients.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::model::{ChannelSet, SystemConfig};

const PIVOT_RTOL: f64 = 1e-13;

/// `m = R⁻¹ Σ_k h̄_k b_k` with
/// `R = σ²I + Σ_k |b_k|² (h̄_k h̄_kᴴ + ψ_k θ_{k,0}² diag(x_n²))`,
/// solved by a Cholesky factorization of the Hermitian positive definite `R`.
pub fn solve_beamformer(
    config: &SystemConfig,
    channels: &ChannelSet,
    transmit_coeffs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = config.num_antennas;
    check_len(
        "transmit coefficients",
        config.num_users,
        transmit_coeffs.len(),
    )?;
    check_len("channel columns", n, channels.num_antennas())?;
    let xs = channels.positions.as_slice();

    let mut r =
        DMatrix::<Complex64>::from_diagonal_element(n, n, Complex64::new(config.noise_power, 0.0));
    let mut rhs = DVector::<Complex64>::zeros(n);
    for (k, (h, b)) in channels
        .estimated_channels
        .iter()
        .zip(transmit_coeffs)
        .enumerate()
    {
        let power = b.norm_sqr();
        if power == 0.0 {
            continue;
        }
        let width = config.uncertainty_widths[k];
        let csi = power * channels.uncertainty_coeffs[k] * width * width;
        for i in 0..n {
            rhs[i] += h[i] * b;
            for j in 0..n {
                r[(i, j)] += h[i] * h[j].conj() * power;
            }
            r[(i, i)] += csi * xs[i] * xs[i];
        }
    }
    let scale = (0..n).map(|i| r[(i, i)].re).fold(0.0, f64::max);
    let chol = r
        .cholesky()
        .ok_or_else(|| Error::Singular("receive covariance is not positive definite".into()))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|v| v.re)
        .fold(f64::INFINITY, f64::min);
    if min_pivot * min_pivot <= PIVOT_RTOL * scale {
        return Err(Error::Singular(format!(
            "receive covariance is numerically singular (pivot {min_pivot:e})"
        )));
    }
    let m = chol.solve(&rhs);
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical(
            "beamformer solve produced non-finite entries".into(),
        ));
    }
    Ok(m.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_channels, AntennaPositions};

    fn scalar() -> SystemConfig {
        SystemConfig {
            num_users: 1,
            num_antennas: 1,
            aperture_length: 8.0,
            min_spacing: 0.5,
            wavelength: 1.0,
            path_loss_exponent: 2.0,
            noise_power: 1.0,
            power_caps: vec![1.0],
            uncertainty_widths: vec![0.0],
            user_distances: vec![1.0],
            nominal_angles: vec![std::f64::consts::FRAC_PI_2],
        }
    }

    #[test]
    fn scalar_wiener_solution() {
        let cfg = scalar();
        let pos = AntennaPositions::new(vec![0.0], &cfg).unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let m = solve_beamformer(&cfg, &ch, &[Complex64::new(1.0, 0.0)]).unwrap();
        assert!((m[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn silent_users_give_zero_beamformer() {
        let mut cfg = scalar();
        cfg.num_antennas = 3;
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let m = solve_beamformer(&cfg, &ch, &[Complex64::new(0.0, 0.0)]).unwrap();
        assert!(m.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn zero_noise_rank_deficient_is_singular() {
        let mut cfg = scalar();
        cfg.num_antennas = 3;
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        cfg.noise_power = 0.0;
        let err = solve_beamformer(&cfg, &ch, &[Complex64::new(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Singular(_)));
    }
}
