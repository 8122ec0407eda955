//! Benchmark schemes, parameter sweeps and CSV persistence.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_channels, GeometryRanges, SystemConfig, UserGeometry};
use crate::objective::mse_analytic;
use crate::seeding::{derive_seed, rng_from_seed};
use crate::solvers::{alternate_transceiver, bcd_solve, BcdSettings};
use crate::Solution;

/// Header of the sweep results CSV.
pub const CSV_HEADER: &str = "scheme,theta0,snr_db,N,K,L,mse_mean,mse_std,num_geometries,rng_seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Robust joint design of `b`, `m` and `x`.
    Proposed,
    /// Joint design that assumes perfect angle estimates.
    IgnoreCsi,
    /// Robust `b`/`m` design on a fixed uniform array.
    FixedPosition,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Proposed, Scheme::IgnoreCsi, Scheme::FixedPosition];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::IgnoreCsi => "ignore_csi",
            Scheme::FixedPosition => "fixed_position",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// Solve one scenario with a scheme and score it with the true uncertainty.
pub fn run_scheme(
    scheme: Scheme,
    config: &SystemConfig,
    settings: &BcdSettings,
) -> Result<(Solution, f64)> {
    let solution = match scheme {
        Scheme::Proposed => bcd_solve(config, settings)?.0,
        Scheme::IgnoreCsi => bcd_solve(&config.with_uniform_uncertainty(0.0), settings)?.0,
        Scheme::FixedPosition => {
            alternate_transceiver(config, settings, config.initial_positions()?)?.0
        }
    };
    let mse = evaluate(config, &solution)?;
    Ok((solution, mse))
}

fn evaluate(config: &SystemConfig, solution: &Solution) -> Result<f64> {
    let channels = build_channels(config, &solution.positions)?;
    Ok(mse_analytic(config, &channels, solution)?.total)
}

fn default_wavelength() -> f64 {
    1.0
}

fn default_path_loss() -> f64 {
    2.0
}

fn default_noise() -> f64 {
    1.0
}

/// Scenario constants shared by every point of a sweep; per-user geometry,
/// powers and uncertainty widths are filled in per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub num_users: usize,
    pub num_antennas: usize,
    pub aperture_length: f64,
    pub min_spacing: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
    #[serde(default = "default_path_loss")]
    pub path_loss_exponent: f64,
    #[serde(default = "default_noise")]
    pub noise_power: f64,
    #[serde(default)]
    pub geometry: GeometryRanges,
}

impl ScenarioTemplate {
    /// Transmit SNR `P0/σ²` sets every user's power cap.
    pub fn instantiate(&self, geometry: &UserGeometry, point: &GridPoint) -> SystemConfig {
        let k = self.num_users;
        let cap = self.noise_power * 10f64.powf(point.snr_db / 10.0);
        SystemConfig {
            num_users: k,
            num_antennas: point.num_antennas,
            aperture_length: point.aperture_length,
            min_spacing: self.min_spacing,
            wavelength: self.wavelength,
            path_loss_exponent: self.path_loss_exponent,
            noise_power: self.noise_power,
            power_caps: vec![cap; k],
            uncertainty_widths: vec![point.theta0; k],
            user_distances: geometry.distances.clone(),
            nominal_angles: geometry.angles.clone(),
        }
    }
}

fn default_geometries() -> usize {
    50
}

fn all_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

/// A grid of scenarios evaluated for several schemes.
///
/// The grid is the Cartesian product of the four lists; an empty antenna
/// count or aperture list means "the template's value".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: ScenarioTemplate,
    pub theta0_grid: Vec<f64>,
    pub snr_db_grid: Vec<f64>,
    #[serde(default)]
    pub num_antennas_grid: Vec<usize>,
    #[serde(default)]
    pub aperture_grid: Vec<f64>,
    #[serde(default = "default_geometries")]
    pub num_geometries: usize,
    pub rng_seed: u64,
    #[serde(default = "all_schemes")]
    pub schemes: Vec<Scheme>,
}

/// One scenario of a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub theta0: f64,
    pub snr_db: f64,
    pub num_antennas: usize,
    pub aperture_length: f64,
}

fn ascending<T: PartialOrd + fmt::Debug>(name: &str, v: &[T]) -> Result<()> {
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidConfig(format!(
            "{name} must be strictly ascending: {v:?}"
        )));
    }
    Ok(())
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        spec.validate()
            .map_err(|e| e.context(path.display().to_string()))?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn antenna_counts(&self) -> Vec<usize> {
        if self.num_antennas_grid.is_empty() {
            vec![self.base.num_antennas]
        } else {
            self.num_antennas_grid.clone()
        }
    }

    pub fn apertures(&self) -> Vec<f64> {
        if self.aperture_grid.is_empty() {
            vec![self.base.aperture_length]
        } else {
            self.aperture_grid.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta0_grid.is_empty() || self.snr_db_grid.is_empty() {
            return Err(Error::InvalidConfig(
                "theta0_grid and snr_db_grid must be non-empty".into(),
            ));
        }
        ascending("theta0_grid", &self.theta0_grid)?;
        ascending("snr_db_grid", &self.snr_db_grid)?;
        ascending("num_antennas_grid", &self.num_antennas_grid)?;
        ascending("aperture_grid", &self.aperture_grid)?;
        if self.num_geometries == 0 {
            return Err(Error::InvalidConfig(
                "num_geometries must be at least 1".into(),
            ));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one scheme is required".into(),
            ));
        }
        // Every grid point must describe a valid scenario.
        let probe = UserGeometry {
            distances: vec![
                self.base.geometry.distance.0.max(f64::MIN_POSITIVE);
                self.base.num_users
            ],
            angles: vec![std::f64::consts::FRAC_PI_2; self.base.num_users],
        };
        let (d0, d1) = self.base.geometry.distance;
        let (a0, a1) = self.base.geometry.angle;
        if !(d0 > 0.0 && d0 < d1 && a0 > 0.0 && a0 < a1 && a1 < std::f64::consts::PI) {
            return Err(Error::InvalidConfig(format!(
                "geometry ranges must satisfy 0 < distance lo < hi and 0 < angle lo < hi < pi: {:?}",
                self.base.geometry
            )));
        }
        for point in self.grid() {
            let cfg = self.base.instantiate(&probe, &point);
            cfg.validate()?;
            cfg.initial_positions()?;
        }
        Ok(())
    }

    /// Grid points in output order: SNR, antenna count, aperture, then θ₀.
    pub fn grid(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &snr_db in &self.snr_db_grid {
            for num_antennas in self.antenna_counts() {
                for aperture_length in self.apertures() {
                    for &theta0 in &self.theta0_grid {
                        out.push(GridPoint {
                            theta0,
                            snr_db,
                            num_antennas,
                            aperture_length,
                        });
                    }
                }
            }
        }
        out
    }

    /// Geometry `g` is shared by every grid point and scheme of the sweep.
    pub fn geometry(&self, g: usize) -> UserGeometry {
        let mut rng = rng_from_seed(geometry_seed(self.rng_seed, g));
        UserGeometry::sample(self.base.num_users, &self.base.geometry, &mut rng)
    }
}

/// Seed of geometry realization `g`: `derive_seed(rng_seed, [g])`.
pub fn geometry_seed(rng_seed: u64, g: usize) -> u64 {
    derive_seed(rng_seed, &[g as u64])
}

/// Aggregated MSE of one scheme at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scheme: Scheme,
    pub theta0: f64,
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub num_antennas: usize,
    #[serde(rename = "K")]
    pub num_users: usize,
    #[serde(rename = "L")]
    pub aperture_length: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub num_geometries: usize,
    pub rng_seed: u64,
}

impl SweepResult {
    /// Standard error of `mse_mean`.
    pub fn std_error(&self) -> f64 {
        self.mse_std / (self.num_geometries as f64).sqrt()
    }

    fn order(&self, other: &Self) -> Ordering {
        self.scheme
            .cmp(&other.scheme)
            .then(self.snr_db.total_cmp(&other.snr_db))
            .then(self.num_antennas.cmp(&other.num_antennas))
            .then(self.aperture_length.total_cmp(&other.aperture_length))
            .then(self.theta0.total_cmp(&other.theta0))
    }
}

/// Sort in CSV row order: scheme, SNR, antenna count, aperture, θ₀.
pub fn sort_results(results: &mut [SweepResult]) {
    results.sort_by(SweepResult::order);
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Job {
    snr_db: f64,
    num_antennas: usize,
    aperture_length: f64,
    scheme: Scheme,
    geometry: usize,
}

/// Run every scheme on every grid point, averaging over seeded geometries.
///
/// Work is split into (SNR, N, L, scheme, geometry) jobs on the current rayon
/// pool; results are sorted, so the output does not depend on scheduling.
pub fn run_sweep(spec: &SweepSpec, settings: &BcdSettings) -> Result<Vec<SweepResult>> {
    spec.validate()?;
    settings.validate()?;
    let geometries: Vec<UserGeometry> =
        (0..spec.num_geometries).map(|g| spec.geometry(g)).collect();
    let mut jobs = Vec::new();
    for &snr_db in &spec.snr_db_grid {
        for num_antennas in spec.antenna_counts() {
            for aperture_length in spec.apertures() {
                for &scheme in &spec.schemes {
                    for geometry in 0..spec.num_geometries {
                        jobs.push(Job {
                            snr_db,
                            num_antennas,
                            aperture_length,
                            scheme,
                            geometry,
                        });
                    }
                }
            }
        }
    }

    // One MSE per θ₀ for each job.
    let per_job: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|job| run_job(spec, settings, &geometries[job.geometry], job))
        .collect::<Result<_>>()?;

    let mut results = Vec::new();
    for (chunk_jobs, chunk_mse) in jobs
        .chunks(spec.num_geometries)
        .zip(per_job.chunks(spec.num_geometries))
    {
        let job = &chunk_jobs[0];
        for (t, &theta0) in spec.theta0_grid.iter().enumerate() {
            let values: Vec<f64> = chunk_mse.iter().map(|v| v[t]).collect();
            let (mse_mean, mse_std) = mean_std(&values);
            results.push(SweepResult {
                scheme: job.scheme,
                theta0,
                snr_db: job.snr_db,
                num_antennas: job.num_antennas,
                num_users: spec.base.num_users,
                aperture_length: job.aperture_length,
                mse_mean,
                mse_std,
                num_geometries: spec.num_geometries,
                rng_seed: spec.rng_seed,
            });
        }
    }
    sort_results(&mut results);
    Ok(results)
}

fn run_job(
    spec: &SweepSpec,
    settings: &BcdSettings,
    geometry: &UserGeometry,
    job: &Job,
) -> Result<Vec<f64>> {
    let point_at = |theta0: f64| GridPoint {
        theta0,
        snr_db: job.snr_db,
        num_antennas: job.num_antennas,
        aperture_length: job.aperture_length,
    };
    let context = |theta0: f64| {
        format!(
            "{} at snr_db={}, N={}, L={}, theta0={}, geometry {}",
            job.scheme, job.snr_db, job.num_antennas, job.aperture_length, theta0, job.geometry
        )
    };
    match job.scheme {
        // The design ignores θ₀, so solve once and score it at every width.
        Scheme::IgnoreCsi => {
            let nominal = spec.base.instantiate(geometry, &point_at(0.0));
            let (solution, _) = run_scheme(Scheme::IgnoreCsi, &nominal, settings)
                .map_err(|e| e.context(context(0.0)))?;
            spec.theta0_grid
                .iter()
                .map(|&theta0| {
                    let cfg = spec.base.instantiate(geometry, &point_at(theta0));
                    evaluate(&cfg, &solution).map_err(|e| e.context(context(theta0)))
                })
                .collect()
        }
        scheme => spec
            .theta0_grid
            .iter()
            .map(|&theta0| {
                let cfg = spec.base.instantiate(geometry, &point_at(theta0));
                run_scheme(scheme, &cfg, settings)
                    .map(|(_, mse)| mse)
                    .map_err(|e| e.context(context(theta0)))
            })
            .collect(),
    }
}

/// Write results as CSV with [`CSV_HEADER`], rows in [`sort_results`] order.
/// Floats use Rust's shortest round-trip formatting.
pub fn write_results(results: &[SweepResult], path: &Path) -> Result<()> {
    let mut rows = results.to_vec();
    sort_results(&mut rows);
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme,
            r.theta0,
            r.snr_db,
            r.num_antennas,
            r.num_users,
            r.aperture_length,
            r.mse_mean,
            r.mse_std,
            r.num_geometries,
            r.rng_seed
        ));
    }
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = std::fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<SweepResult>> {
    let parse_err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| parse_err(e.to_string()))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != CSV_HEADER {
        return Err(parse_err(format!(
            "unexpected header {:?}",
            header.join(",")
        )));
    }
    reader
        .deserialize()
        .map(|row| row.map_err(|e| parse_err(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small_spec() -> SweepSpec {
        SweepSpec {
            base: ScenarioTemplate {
                num_users: 3,
                num_antennas: 3,
                aperture_length: 4.0,
                min_spacing: 0.5,
                wavelength: 1.0,
                path_loss_exponent: 2.0,
                noise_power: 1.0,
                geometry: GeometryRanges::default(),
            },
            theta0_grid: vec![0.0, 0.1],
            snr_db_grid: vec![10.0],
            num_antennas_grid: vec![],
            aperture_grid: vec![],
            num_geometries: 2,
            rng_seed: 3,
            schemes: Scheme::ALL.to_vec(),
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>().unwrap(), s);
        }
        assert!("fpa".parse::<Scheme>().is_err());
    }

    #[test]
    fn snr_sets_power_caps() {
        let spec = small_spec();
        let geom = spec.geometry(0);
        let cfg = spec.base.instantiate(
            &geom,
            &GridPoint {
                theta0: 0.1,
                snr_db: 10.0,
                num_antennas: 3,
                aperture_length: 4.0,
            },
        );
        assert!(cfg.power_caps.iter().all(|p| (p - 10.0).abs() < 1e-12));
        assert_eq!(cfg.uncertainty_widths, vec![0.1; 3]);
    }

    #[test]
    fn geometry_respects_ranges() {
        let spec = small_spec();
        for g in 0..20 {
            let geom = spec.geometry(g);
            assert!(geom.distances.iter().all(|d| (10.0..50.0).contains(d)));
            let (lo, hi) = GeometryRanges::default().angle;
            assert!(geom.angles.iter().all(|a| (lo..hi).contains(a)));
        }
        assert_eq!(spec.geometry(4), spec.geometry(4));
        assert_ne!(spec.geometry(4), spec.geometry(5));
    }

    #[test]
    fn spec_validation() {
        let mut spec = small_spec();
        spec.theta0_grid = vec![0.1, 0.0];
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.snr_db_grid.clear();
        assert!(spec.validate().is_err());
        let mut spec = small_spec();
        spec.aperture_grid = vec![0.5];
        assert!(spec.validate().is_err());
        small_spec().validate().unwrap();
    }

    #[test]
    fn mean_std_uses_sample_variance() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn empty_results_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_results(&[], &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            format!("{CSV_HEADER}\n")
        );
        assert!(read_results(&path).unwrap().is_empty());
    }

    #[test]
    fn write_errors_carry_path() {
        let err = write_results(&[], Path::new("/nonexistent-dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
