//! Command-line pipeline over the `cubicphase` library.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Mode;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "cubicphase", version, about = "Photon-added coherent states as cubic phase approximants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Fock truncation.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Ideal,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ideal => Mode::Ideal,
            ModeArg::Full => Mode::Full,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heterodyne-sample a coherent state and postselect on added photons.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        /// Raw sample count.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Maximum-likelihood density matrix from accepted samples.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Sample CSV written by `simulate`.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Orbit fidelity against the cubic state over coherent amplitudes.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Wigner function on a grid.
    Wigner {
        #[command(flatten)]
        common: Common,
        /// Density-matrix JSON to use instead of the configured state.
        #[arg(long)]
        rho: Option<PathBuf>,
    },
    /// Best cubic reference angle for each amplitude phase.
    PhaseSweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Photon-number distribution and its islands.
    PhotonStats {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rho: Option<PathBuf>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Remove the orbit-optimal Gaussian first.
        #[arg(long)]
        unwind: bool,
        /// Island threshold relative to the largest probability.
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn print_summary<T: Serialize>(v: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v)
        .map_err(|e| CliError::Numerical(format!("serialization: {e}")))?;
    println!("{text}");
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<i32> {
    match cmd {
        Command::Simulate { common, seed, n, k } => {
            let mut cfg: config::SimulateConfig = config::load(common.config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(n) = n {
                cfg.n = n;
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(d) = common.dim {
                cfg.dim = d;
            }
            print_summary(&commands::cmd_simulate(&cfg, &common.out)?)?;
        }
        Command::Reconstruct { common, samples } => {
            let mut cfg: config::ReconstructConfig = config::load(common.config.as_deref())?;
            if samples.is_some() {
                cfg.samples = samples;
            }
            if let Some(d) = common.dim {
                cfg.maxlik.dim = d;
            }
            let report = commands::cmd_reconstruct(&cfg, &common.out)?;
            print_summary(&report)?;
            if !report.converged {
                eprintln!(
                    "error: maximum likelihood did not converge in {} iterations",
                    report.iterations
                );
                return Ok(3);
            }
        }
        Command::Scan { common, seed, mode } => {
            let mut cfg: config::ScanConfig = config::load(common.config.as_deref())?;
            if let Some(s) = seed {
                cfg.full.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            if let Some(d) = common.dim {
                cfg.dim = d;
            }
            let report = commands::cmd_scan(&cfg, &common.out)?;
            print_summary(&serde_json::json!({
                "points": report.rows.len(),
                "best": report.best(),
                "gaussian_baseline": report.baseline,
            }))?;
        }
        Command::Wigner { common, rho } => {
            let mut cfg: config::WignerConfig = config::load(common.config.as_deref())?;
            if rho.is_some() {
                cfg.rho = rho;
            }
            if let Some(d) = common.dim {
                cfg.dim = d;
            }
            let grid = commands::cmd_wigner(&cfg, &common.out)?;
            print_summary(&serde_json::json!({
                "shape": [grid.x_axis.len(), grid.p_axis.len()],
                "integral": grid.integral(),
                "min": grid.min(),
            }))?;
        }
        Command::PhaseSweep { common, seed, mode } => {
            let mut cfg: config::PhaseSweepConfig = config::load(common.config.as_deref())?;
            if let Some(s) = seed {
                cfg.full.seed = s;
            }
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            if let Some(d) = common.dim {
                cfg.dim = d;
            }
            let report = commands::cmd_phase_sweep(&cfg, &common.out)?;
            print_summary(&serde_json::json!({
                "rows": report.rows,
                "matches_expected": report.matches_expected,
            }))?;
        }
        Command::PhotonStats {
            common,
            rho,
            n_max,
            unwind,
            threshold,
        } => {
            let mut cfg: config::PhotonStatsConfig = config::load(common.config.as_deref())?;
            if rho.is_some() {
                cfg.rho = rho;
            }
            if let Some(n) = n_max {
                cfg.n_max = n;
            }
            if unwind {
                cfg.unwind = true;
            }
            if let Some(t) = threshold {
                cfg.island_threshold = t;
            }
            if let Some(d) = common.dim {
                cfg.dim = d;
            }
            let report = commands::cmd_photon_stats(&cfg, &common.out)?;
            print_summary(&serde_json::json!({
                "islands": report.islands,
                "unwinding": report.unwinding,
            }))?;
        }
    }
    Ok(0)
}
