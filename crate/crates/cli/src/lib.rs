//! Subcommands of the `fa-aircomp` binary.
//!
//! Results go to the files named on the command line; diagnostics go to
//! stderr. Exit status: 0 on success, 1 for usage errors, 2 for unreadable,
//! malformed or infeasible inputs, 3 for numerical failures (including a
//! failed validation check).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use serde::Serialize;

use fa_aircomp::experiments::CSV_HEADER;
use fa_aircomp::validate::{run_validation, CheckOutcome};
use fa_aircomp::{
    bcd_solve, build_channels, mse_analytic, run_sweep, write_results, BcdSettings, BcdTrace,
    Error, MseBreakdown, Solution, SweepSpec, SystemConfig,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "fa-aircomp",
    version,
    about = "Robust over-the-air computation with a fluid antenna array"
)]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Optimize one scenario and write the solution, MSE breakdown and trace as JSON.
    Solve {
        /// Scenario configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output JSON path.
        #[arg(long)]
        out: PathBuf,
        /// Solver tolerances (JSON); missing fields take their defaults.
        #[arg(long)]
        settings: Option<PathBuf>,
    },
    /// Run a parameter sweep over all schemes and write the results CSV.
    Sweep {
        /// Sweep description (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        /// Override the number of geometries averaged per grid point.
        #[arg(long)]
        geometries: Option<usize>,
        /// Override the sweep seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Solver tolerances (JSON); missing fields take their defaults.
        #[arg(long)]
        settings: Option<PathBuf>,
    },
    /// Check the solvers against brute-force and finite-difference oracles.
    Validate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write the per-check outcomes as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Output document of `solve`.
#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub solution: Solution,
    pub mse: MseBreakdown,
    pub converged: bool,
    pub trace: BcdTrace,
}

/// Failure classes that map onto exit codes.
#[derive(Debug)]
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Numerical(e) => e,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e.root() {
            Error::Singular(_) | Error::Numerical(_) | Error::Domain(_) => {
                Failure::Numerical(e.into())
            }
            _ => Failure::Input(e.into()),
        }
    }
}

/// Run a subcommand and return its exit status.
pub fn run(command: Command) -> u8 {
    let result = match command {
        Command::Solve {
            config,
            out,
            settings,
        } => solve(&config, &out, settings.as_deref()),
        Command::Sweep {
            spec,
            out,
            geometries,
            seed,
            jobs,
            settings,
        } => sweep(&spec, &out, geometries, seed, jobs, settings.as_deref()),
        Command::Validate { seed, report } => validate(seed, report.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            failure.exit_code()
        }
    }
}

fn load_settings(path: Option<&Path>) -> Result<BcdSettings, Failure> {
    let Some(path) = path else {
        return Ok(BcdSettings::default());
    };
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let settings: BcdSettings = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    settings.validate()?;
    Ok(settings)
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Input)
}

fn solve(config_path: &Path, out: &Path, settings: Option<&Path>) -> Result<(), Failure> {
    let config = SystemConfig::load(config_path)?;
    let settings = load_settings(settings)?;
    log::info!(
        "solving K={} N={} L={}",
        config.num_users,
        config.num_antennas,
        config.aperture_length
    );
    let (solution, trace) = bcd_solve(&config, &settings)?;
    let channels = build_channels(&config, &solution.positions)?;
    let mse = mse_analytic(&config, &channels, &solution)?;
    if !trace.converged {
        log::warn!(
            "stopped after {} outer iterations without converging",
            trace.iterations.len()
        );
    }
    log::info!("total MSE {:.6e}", mse.total);
    let report = SolveReport {
        solution,
        mse,
        converged: trace.converged,
        trace,
    };
    let json = serde_json::to_string_pretty(&report)
        .context("serializing solution")
        .map_err(Failure::Numerical)?;
    write_file(out, &json)
}

fn sweep(
    spec_path: &Path,
    out: &Path,
    geometries: Option<usize>,
    seed: Option<u64>,
    jobs: Option<usize>,
    settings: Option<&Path>,
) -> Result<(), Failure> {
    let mut spec = SweepSpec::load(spec_path)?;
    if let Some(g) = geometries {
        spec.num_geometries = g;
    }
    if let Some(s) = seed {
        spec.rng_seed = s;
    }
    spec.validate()?;
    let settings = load_settings(settings)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .context("starting worker pool")
        .map_err(Failure::Input)?;
    log::info!(
        "sweep of {} grid points on {} threads",
        spec.grid().len(),
        pool.current_num_threads()
    );
    let results = pool.install(|| run_sweep(&spec, &settings))?;
    write_results(&results, out)?;
    log::info!("wrote {} rows after header {CSV_HEADER:?}", results.len());
    Ok(())
}

fn validate(seed: u64, report: Option<&Path>) -> Result<(), Failure> {
    let outcomes = run_validation(seed);
    for CheckOutcome {
        name,
        passed,
        detail,
    } in &outcomes
    {
        eprintln!("{} {name}: {detail}", if *passed { "PASS" } else { "FAIL" });
    }
    if let Some(path) = report {
        let json = serde_json::to_string_pretty(&outcomes)
            .context("serializing report")
            .map_err(Failure::Numerical)?;
        write_file(path, &json)?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(Failure::Numerical(anyhow::anyhow!(
            "{failed} of {} checks failed",
            outcomes.len()
        )));
    }
    Ok(())
}
