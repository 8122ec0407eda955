//! Scenario configuration and the line-of-sight channel model.
//!
//! Positions and lengths are expressed in wavelengths-compatible units; the
//! wavelength enters every phase explicitly so configurations with `λ != 1`
//! behave consistently.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result, Violation};
use crate::seeding::rng_from_seed;

/// All constants describing one uplink scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_antennas: usize,
    pub aperture_length: f64,
    pub min_spacing: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    pub path_loss_exponent: f64,
    pub noise_power: f64,
    pub power_caps: Vec<f64>,
    pub uncertainty_widths: Vec<f64>,
    pub user_distances: Vec<f64>,
    pub nominal_angles: Vec<f64>,
}

fn default_wavelength() -> f64 {
    1.0
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "{name} must be a positive finite number, got {v}"
        )))
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let k = self.num_users;
        if k == 0 {
            return Err(Error::InvalidConfig("num_users must be at least 1".into()));
        }
        if self.num_antennas == 0 {
            return Err(Error::InvalidConfig(
                "num_antennas must be at least 1".into(),
            ));
        }
        positive("aperture_length", self.aperture_length)?;
        positive("min_spacing", self.min_spacing)?;
        positive("wavelength", self.wavelength)?;
        positive("path_loss_exponent", self.path_loss_exponent)?;
        positive("noise_power", self.noise_power)?;
        for (name, v) in [
            ("power_caps", &self.power_caps),
            ("uncertainty_widths", &self.uncertainty_widths),
            ("user_distances", &self.user_distances),
            ("nominal_angles", &self.nominal_angles),
        ] {
            if v.len() != k {
                return Err(Error::InvalidConfig(format!(
                    "{name} has {} entries but num_users is {k}",
                    v.len()
                )));
            }
        }
        for (i, &p) in self.power_caps.iter().enumerate() {
            positive(&format!("power_caps[{i}]"), p)?;
        }
        for (i, &d) in self.user_distances.iter().enumerate() {
            positive(&format!("user_distances[{i}]"), d)?;
        }
        for (i, &w) in self.uncertainty_widths.iter().enumerate() {
            if !(0.0..=PI / 2.0).contains(&w) {
                return Err(Error::InvalidConfig(format!(
                    "uncertainty_widths[{i}] = {w} is outside [0, pi/2]"
                )));
            }
        }
        for (i, &a) in self.nominal_angles.iter().enumerate() {
            if !(a > 0.0 && a < PI) {
                return Err(Error::InvalidConfig(format!(
                    "nominal_angles[{i}] = {a} is outside (0, pi)"
                )));
            }
        }
        let span = (self.num_antennas - 1) as f64 * self.min_spacing;
        if span > self.aperture_length {
            return Err(Error::InvalidConfig(format!(
                "{} antennas at spacing {} need {span}, more than the aperture {}",
                self.num_antennas, self.min_spacing, self.aperture_length
            )));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: SystemConfig = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("malformed config JSON: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: SystemConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config
            .validate()
            .map_err(|e| e.context(path.display().to_string()))?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `2π/λ`
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Copy of this config with every user's uncertainty width replaced.
    pub fn with_uniform_uncertainty(&self, width: f64) -> Self {
        SystemConfig {
            uncertainty_widths: vec![width; self.num_users],
            ..self.clone()
        }
    }

    pub fn links(&self) -> Vec<UserLink> {
        let kw = self.wavenumber();
        (0..self.num_users)
            .map(|k| {
                let amplitude = self.user_distances[k].powf(-self.path_loss_exponent).sqrt();
                let (sin, cos) = self.nominal_angles[k].sin_cos();
                UserLink {
                    amplitude,
                    spatial_frequency: kw * cos,
                    psi: (kw * amplitude * sin).powi(2) / 3.0,
                    error_rate: kw * sin,
                    width: self.uncertainty_widths[k],
                }
            })
            .collect()
    }

    /// Uniformly spaced start `x_n = L·n/(N+1)`.
    ///
    /// When that spacing is below `L0` but a strictly feasible placement still
    /// exists, the slack is spread evenly instead: boundary slacks and the
    /// excess over `L0` of every gap all equal `(L - (N-1)·L0)/(N+1)`.
    pub fn initial_positions(&self) -> Result<AntennaPositions> {
        let n = self.num_antennas;
        let l = self.aperture_length;
        let uniform = l / (n + 1) as f64;
        let xs: Vec<f64> = if n == 1 || uniform > self.min_spacing {
            (1..=n).map(|i| l * i as f64 / (n + 1) as f64).collect()
        } else {
            let slack = (l - (n - 1) as f64 * self.min_spacing) / (n + 1) as f64;
            if slack <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "no strictly feasible placement of {n} antennas in aperture {l} with spacing {}",
                    self.min_spacing
                )));
            }
            (0..n)
                .map(|i| slack + i as f64 * (self.min_spacing + slack))
                .collect()
        };
        AntennaPositions::new(xs, self)
    }
}

/// Per-user constants that do not depend on the antenna positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLink {
    /// `sqrt(l_k^{-α})`
    pub amplitude: f64,
    /// `(2π/λ)·cos θ̄_k`: phase slope of the steering vector along the array.
    pub spatial_frequency: f64,
    /// `ψ_k = (1/3)((2π/λ)·sqrt(l_k^{-α})·sin θ̄_k)²`
    pub psi: f64,
    /// `(2π/λ)·sin θ̄_k`: first-order phase sensitivity to angle error, per unit position.
    pub error_rate: f64,
    /// `θ_{k,0}`
    pub width: f64,
}

impl UserLink {
    #[inline]
    pub fn steering(&self, x: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.spatial_frequency * x)
    }

    /// Weight `ψ_k θ_{k,0}²` of the CSI-error term.
    #[inline]
    pub fn csi_weight(&self) -> f64 {
        self.psi * self.width * self.width
    }
}

/// Antenna position vector, feasible for the config it was built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AntennaPositions(Vec<f64>);

impl AntennaPositions {
    pub fn new(positions: Vec<f64>, config: &SystemConfig) -> Result<Self> {
        check_feasible(
            &positions,
            config.num_antennas,
            config.aperture_length,
            config.min_spacing,
        )
        .map_err(Error::Infeasible)?;
        Ok(AntennaPositions(positions))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// All barrier slacks strictly positive.
    pub fn is_strictly_feasible(&self, aperture: f64, min_spacing: f64) -> bool {
        slacks(&self.0, aperture, min_spacing)
            .iter()
            .all(|&s| s > 0.0)
    }
}

/// Checks `x_1 >= 0`, `x_N <= L` and `x_n - x_{n-1} >= L0`.
pub fn check_feasible(
    xs: &[f64],
    expected: usize,
    aperture: f64,
    min_spacing: f64,
) -> Result<(), Violation> {
    if xs.len() != expected {
        return Err(Violation::WrongCount {
            expected,
            got: xs.len(),
        });
    }
    if let Some(index) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Violation::NotFinite { index });
    }
    if xs[0] < 0.0 {
        return Err(Violation::BelowAperture { first: xs[0] });
    }
    let last = xs[xs.len() - 1];
    if last > aperture {
        return Err(Violation::AboveAperture { last, aperture });
    }
    for (i, w) in xs.windows(2).enumerate() {
        let gap = w[1] - w[0];
        if gap < min_spacing {
            return Err(Violation::Spacing {
                index: i + 1,
                gap,
                min_spacing,
            });
        }
    }
    Ok(())
}

/// Barrier slacks in order `[x_1, x_2 - x_1 - L0, …, x_N - x_{N-1} - L0, L - x_N]`.
pub fn slacks(xs: &[f64], aperture: f64, min_spacing: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len() + 1);
    out.push(xs[0]);
    out.extend(xs.windows(2).map(|w| w[1] - w[0] - min_spacing));
    out.push(aperture - xs[xs.len() - 1]);
    out
}

/// Estimated channels `h̄_k` and uncertainty scalars `ψ_k` at one placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `K` rows of `N` entries.
    pub estimated_channels: Vec<Vec<Complex64>>,
    pub uncertainty_coeffs: Vec<f64>,
    pub positions: AntennaPositions,
}

impl ChannelSet {
    pub fn num_users(&self) -> usize {
        self.estimated_channels.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    /// `mᴴ h̄_k`
    pub fn project(&self, user: usize, beamformer: &[Complex64]) -> Complex64 {
        self.estimated_channels[user]
            .iter()
            .zip(beamformer)
            .map(|(h, m)| m.conj() * h)
            .sum()
    }
}

pub fn build_channels(config: &SystemConfig, positions: &AntennaPositions) -> Result<ChannelSet> {
    check_feasible(
        positions.as_slice(),
        config.num_antennas,
        config.aperture_length,
        config.min_spacing,
    )
    .map_err(Error::Infeasible)?;
    check_len(
        "user distances",
        config.num_users,
        config.user_distances.len(),
    )?;
    let links = config.links();
    let xs = positions.as_slice();
    Ok(ChannelSet {
        estimated_channels: links
            .iter()
            .map(|link| xs.iter().map(|&x| link.steering(x)).collect())
            .collect(),
        uncertainty_coeffs: links.iter().map(|l| l.psi).collect(),
        positions: positions.clone(),
    })
}

/// How angle errors are drawn when sampling realized channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationModel {
    /// One `Δθ_k` per user applied to the first-order expansion of every entry.
    SharedAngle,
    /// Independent `Δθ_{k,n}` per entry in the first-order expansion; the error
    /// covariance is then exactly `diag(ψ_k x_n² θ_{k,0}²)`.
    PerAntenna,
    /// Exact steering vector at `θ̄_k + Δθ_k` (no linearization).
    ExactAngle,
}

#[inline]
fn draw_error<R: Rng + ?Sized>(rng: &mut R, width: f64) -> f64 {
    if width > 0.0 {
        rng.random_range(-width..=width)
    } else {
        0.0
    }
}

/// Draws realized channels around a fixed set of estimates.
#[derive(Debug, Clone)]
pub struct ChannelSampler<'a> {
    links: Vec<UserLink>,
    nominal_angles: &'a [f64],
    wavenumber: f64,
    channels: &'a ChannelSet,
}

impl<'a> ChannelSampler<'a> {
    pub fn new(config: &'a SystemConfig, channels: &'a ChannelSet) -> Self {
        ChannelSampler {
            links: config.links(),
            nominal_angles: &config.nominal_angles,
            wavenumber: config.wavenumber(),
            channels,
        }
    }

    /// Overwrite `out` (K rows of N) with one realization.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        model: PerturbationModel,
        rng: &mut R,
        out: &mut [Vec<Complex64>],
    ) {
        let xs = self.channels.positions.as_slice();
        for (((link, hbar), &nominal), row) in self
            .links
            .iter()
            .zip(&self.channels.estimated_channels)
            .zip(self.nominal_angles)
            .zip(out.iter_mut())
        {
            match model {
                PerturbationModel::SharedAngle => {
                    let d = draw_error(rng, link.width);
                    for ((o, h), &x) in row.iter_mut().zip(hbar).zip(xs) {
                        *o = h + h * Complex64::new(0.0, link.error_rate * x * d);
                    }
                }
                PerturbationModel::PerAntenna => {
                    for ((o, h), &x) in row.iter_mut().zip(hbar).zip(xs) {
                        let d = draw_error(rng, link.width);
                        *o = h + h * Complex64::new(0.0, link.error_rate * x * d);
                    }
                }
                PerturbationModel::ExactAngle => {
                    let phase_rate =
                        self.wavenumber * (nominal + draw_error(rng, link.width)).cos();
                    for (o, &x) in row.iter_mut().zip(xs) {
                        *o = Complex64::from_polar(link.amplitude, phase_rate * x);
                    }
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        model: PerturbationModel,
        rng: &mut R,
    ) -> Vec<Vec<Complex64>> {
        let mut out = self.channels.estimated_channels.clone();
        self.sample_into(model, rng, &mut out);
        out
    }
}

/// Draw one set of realized channels `h_k` around the estimates.
pub fn sample_channels_with<R: Rng + ?Sized>(
    config: &SystemConfig,
    channels: &ChannelSet,
    model: PerturbationModel,
    rng: &mut R,
) -> Vec<Vec<Complex64>> {
    ChannelSampler::new(config, channels).sample(model, rng)
}

/// Realized channels `h_k = h̄_k + h̄_k ⊙ q(θ̄_k)·Δθ_k` with one uniform
/// `Δθ_k ~ U[-θ_{k,0}, θ_{k,0}]` per user. Deterministic in `seed`.
pub fn sample_perturbed_channels(
    config: &SystemConfig,
    channels: &ChannelSet,
    seed: u64,
) -> Vec<Vec<Complex64>> {
    let mut rng = rng_from_seed(seed);
    sample_channels_with(config, channels, PerturbationModel::SharedAngle, &mut rng)
}

/// Random user placement: nominal angle and distance per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub distances: Vec<f64>,
    pub angles: Vec<f64>,
}

/// Ranges the scenario generator samples user geometry from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryRanges {
    pub distance: (f64, f64),
    pub angle: (f64, f64),
}

impl Default for GeometryRanges {
    fn default() -> Self {
        GeometryRanges {
            distance: (10.0, 50.0),
            angle: (PI / 12.0, 11.0 * PI / 12.0),
        }
    }
}

impl UserGeometry {
    pub fn sample<R: Rng + ?Sized>(num_users: usize, ranges: &GeometryRanges, rng: &mut R) -> Self {
        let mut angles = Vec::with_capacity(num_users);
        let mut distances = Vec::with_capacity(num_users);
        for _ in 0..num_users {
            angles.push(rng.random_range(ranges.angle.0..ranges.angle.1));
            distances.push(rng.random_range(ranges.distance.0..ranges.distance.1));
        }
        UserGeometry { distances, angles }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx_eq::close;

    mod approx_eq {
        pub fn close(a: f64, b: f64, tol: f64) -> bool {
            (a - b).abs() <= tol
        }
    }

    pub(crate) fn single_user(n: usize, angle: f64, width: f64) -> SystemConfig {
        SystemConfig {
            num_users: 1,
            num_antennas: n,
            aperture_length: 8.0,
            min_spacing: 0.5,
            wavelength: 1.0,
            path_loss_exponent: 2.0,
            noise_power: 1.0,
            power_caps: vec![1.0],
            uncertainty_widths: vec![width],
            user_distances: vec![1.0],
            nominal_angles: vec![angle],
        }
    }

    #[test]
    fn zero_position_gives_unit_channel() {
        let cfg = single_user(1, 1.0, 0.0);
        let pos = AntennaPositions::new(vec![0.0], &cfg).unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        assert!(close(ch.estimated_channels[0][0].re, 1.0, 1e-15));
        assert!(close(ch.estimated_channels[0][0].im, 0.0, 1e-15));
    }

    #[test]
    fn psi_at_broadside() {
        let cfg = single_user(1, PI / 2.0, 0.0);
        let psi = cfg.links()[0].psi;
        assert!(close(psi, 4.0 * PI * PI / 3.0, 1e-12));
        assert!(close(psi, 13.15947, 1e-5));
    }

    #[test]
    fn quarter_wavelength_phase() {
        let broadside = single_user(1, PI / 2.0, 0.0);
        let pos = AntennaPositions::new(vec![0.25], &broadside).unwrap();
        let h = build_channels(&broadside, &pos).unwrap().estimated_channels[0][0];
        assert!(close(h.re, 1.0, 1e-12) && close(h.im, 0.0, 1e-12));

        // θ̄ = 0 lies outside the config's (0, π) range, so evaluate the link directly.
        let link = UserLink {
            amplitude: 1.0,
            spatial_frequency: 2.0 * PI * 0.0f64.cos(),
            psi: 0.0,
            error_rate: 0.0,
            width: 0.0,
        };
        let h = link.steering(0.25);
        assert!(close(h.re, 0.0, 1e-12) && close(h.im, 1.0, 1e-12));
    }

    #[test]
    fn infeasible_positions_name_the_constraint() {
        let mut cfg = single_user(2, 1.0, 0.0);
        cfg.min_spacing = 0.5;
        let err = AntennaPositions::new(vec![0.2, 0.6], &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible(Violation::Spacing { index: 1, .. })
        ));
        let err = AntennaPositions::new(vec![-0.1, 1.0], &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible(Violation::BelowAperture { .. })
        ));
        let err = AntennaPositions::new(vec![1.0, 8.5], &cfg).unwrap_err();
        assert!(matches!(
            err,
            Error::Infeasible(Violation::AboveAperture { .. })
        ));
        assert!(err.to_string().contains("x_N <= L"));
    }

    #[test]
    fn config_rejects_overpacked_array() {
        let mut cfg = single_user(18, 1.0, 0.0);
        cfg.aperture_length = 8.0;
        cfg.min_spacing = 0.5;
        assert!(cfg.validate().is_err());
        cfg.num_antennas = 17;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_rejects_bad_vectors_and_widths() {
        let mut cfg = single_user(2, 1.0, 0.0);
        cfg.power_caps.push(1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = single_user(2, 1.0, 2.0);
        assert!(cfg.validate().is_err());
        cfg.uncertainty_widths[0] = 0.1;
        cfg.nominal_angles[0] = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_field_names_round_trip() {
        let cfg = single_user(3, 1.2, 0.1);
        let text = cfg.to_json();
        for field in [
            "num_users",
            "num_antennas",
            "aperture_length",
            "min_spacing",
            "wavelength",
            "path_loss_exponent",
            "noise_power",
            "power_caps",
            "uncertainty_widths",
            "user_distances",
            "nominal_angles",
        ] {
            assert!(text.contains(&format!("\"{field}\"")), "{field}");
        }
        assert_eq!(SystemConfig::from_json(&text).unwrap(), cfg);
        let err = SystemConfig::from_json(r#"{"num_users": 1}"#).unwrap_err();
        assert!(err.to_string().contains("num_antennas"));
    }

    #[test]
    fn initializer_matches_uniform_grid() {
        let mut cfg = single_user(8, 1.0, 0.0);
        cfg.aperture_length = 8.0;
        let x = cfg.initial_positions().unwrap();
        for (i, &v) in x.as_slice().iter().enumerate() {
            assert!(close(v, 8.0 * (i + 1) as f64 / 9.0, 1e-12));
        }
    }

    #[test]
    fn initializer_spreads_slack_when_uniform_grid_too_tight() {
        let mut cfg = single_user(8, 1.0, 0.0);
        cfg.aperture_length = 4.0;
        let x = cfg.initial_positions().unwrap();
        assert!(x.is_strictly_feasible(4.0, 0.5));
        let s = slacks(x.as_slice(), 4.0, 0.5);
        for v in &s {
            assert!(close(*v, 0.5 / 9.0, 1e-12));
        }
        cfg.aperture_length = 3.5;
        assert!(cfg.initial_positions().is_err());
    }

    #[test]
    fn zero_width_leaves_channels_unchanged() {
        let cfg = single_user(3, 1.0, 0.0);
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        assert_eq!(
            sample_perturbed_channels(&cfg, &ch, 3),
            ch.estimated_channels
        );
    }

    #[test]
    fn perturbation_is_imaginary_multiplicative() {
        let cfg = single_user(4, 1.1, 0.2);
        let pos = cfg.initial_positions().unwrap();
        let ch = build_channels(&cfg, &pos).unwrap();
        let h = sample_perturbed_channels(&cfg, &ch, 11);
        let ratios: Vec<Complex64> = h[0]
            .iter()
            .zip(&ch.estimated_channels[0])
            .map(|(a, b)| (a - b) / b)
            .collect();
        let link = cfg.links()[0];
        // Common Δθ: ratio / (error_rate·x_n) is the same for every antenna.
        let d0 = ratios[0].im / (link.error_rate * pos.as_slice()[0]);
        assert!(d0.abs() <= 0.2);
        for (r, &x) in ratios.iter().zip(pos.as_slice()) {
            assert!(r.re.abs() < 1e-12);
            assert!(close(r.im, d0 * link.error_rate * x, 1e-12));
        }
    }
}
