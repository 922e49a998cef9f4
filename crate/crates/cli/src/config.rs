//! JSON configuration documents for each subcommand.
//!
//! Every field has a default, so `{}` is a valid document. Unknown fields are
//! rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use cubicphase::analysis::{GridSpec, DEFAULT_ISLAND_THRESHOLD};
use cubicphase::gaussian::SearchConfig;
use cubicphase::tomography::MaxLikOptions;
use cubicphase::{states, StateVector, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Reads a config document; `None` gives the defaults.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            parse(&text).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                other => other,
            })
        }
    }
}

/// Parses a config document, reporting line, column and offending field.
pub fn parse<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    serde_json::from_str(text).map_err(|e| {
        CliError::config(format!("line {} column {}: {e}", e.line(), e.column()))
    })
}

/// A complex number written as `[re, im]`.
pub type Complex2 = [f64; 2];

pub fn complex(c: Complex2) -> C64 {
    C64::new(c[0], c[1])
}

/// A state named in a config document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum,
    Fock { n: usize },
    Coherent { alpha: Complex2 },
    PhotonAdded { alpha: Complex2, k: usize },
    Cubic {
        gamma: f64,
        #[serde(default)]
        theta: f64,
    },
}

impl StateSpec {
    pub fn build(&self, dim: usize) -> CliResult<StateVector> {
        Ok(match self {
            StateSpec::Vacuum => states::vacuum(dim)?,
            StateSpec::Fock { n } => states::fock(*n, dim)?,
            StateSpec::Coherent { alpha } => states::coherent(complex(*alpha), dim)?,
            StateSpec::PhotonAdded { alpha, k } => {
                states::photon_added_coherent(complex(*alpha), *k, dim)?
            }
            StateSpec::Cubic { gamma, theta } => states::cubic_phase_state(*gamma, *theta, dim)?.state,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// Coherent amplitude of the input state.
    pub alpha: Complex2,
    /// Photons added by postselection.
    pub k: usize,
    /// Raw heterodyne samples.
    pub n: usize,
    pub seed: u64,
    /// Seed for acceptance draws; defaults to a value derived from `seed`.
    pub postselect_seed: Option<u64>,
    /// Truncation used to represent the input state.
    pub dim: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            alpha: [0.0, -0.97],
            k: 3,
            n: 1_000_000,
            seed: 1,
            postselect_seed: None,
            dim: 40,
        }
    }
}

/// Acceptance draws use this seed unless one is given.
pub fn derived_postselect_seed(seed: u64) -> u64 {
    seed ^ 0xA5A5_5A5A_C3C3_3C3C
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub samples: Option<PathBuf>,
    pub maxlik: MaxLikOptions,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            samples: None,
            maxlik: MaxLikOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact photon-added states.
    Ideal,
    /// Simulated heterodyne data, postselection and MaxLik reconstruction.
    Full,
}

/// Settings of the Monte-Carlo plus tomography route.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FullModeConfig {
    /// Accepted samples collected per point.
    pub accepted: usize,
    pub seed: u64,
    pub maxlik: MaxLikOptions,
}

impl Default for FullModeConfig {
    fn default() -> Self {
        Self {
            accepted: 100_000,
            seed: 1,
            maxlik: MaxLikOptions::default(),
        }
    }
}

/// A closed range `[start, stop]` sampled every `step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range1 {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range1 {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0) || !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::config("range step must be > 0 and bounds finite"));
        }
        if self.stop < self.start {
            return Err(CliError::config("range stop is below start"));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.start + self.step * i as f64).collect())
    }

    pub fn single(v: f64) -> Self {
        Self {
            start: v,
            stop: v,
            step: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    pub gamma: f64,
    pub theta: f64,
    pub k: usize,
    pub dim: usize,
    pub re_alpha: Range1,
    pub im_alpha: Range1,
    pub mode: Mode,
    pub search: SearchConfig,
    pub full: FullModeConfig,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            gamma: 0.4,
            theta: 0.0,
            k: 3,
            dim: 40,
            re_alpha: Range1::single(0.0),
            im_alpha: Range1 {
                start: -2.0,
                stop: -0.2,
                step: 0.05,
            },
            mode: Mode::Ideal,
            search: SearchConfig::default(),
            full: FullModeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub state: StateSpec,
    /// Density-matrix JSON; overrides `state`.
    pub rho: Option<PathBuf>,
    pub dim: usize,
    pub grid: GridSpec,
}

impl Default for WignerConfig {
    fn default() -> Self {
        Self {
            state: StateSpec::PhotonAdded {
                alpha: [0.0, -0.97],
                k: 3,
            },
            rho: None,
            dim: 40,
            grid: GridSpec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSweepConfig {
    pub amplitude: f64,
    /// Phases of the coherent amplitude, radians.
    pub phases: Vec<f64>,
    pub gamma: f64,
    pub k: usize,
    pub dim: usize,
    pub mode: Mode,
    pub search: SearchConfig,
    pub full: FullModeConfig,
}

impl Default for PhaseSweepConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            phases: vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0],
            gamma: 0.4,
            k: 3,
            dim: 40,
            mode: Mode::Ideal,
            search: SearchConfig::default(),
            full: FullModeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotonStatsConfig {
    pub state: StateSpec,
    pub rho: Option<PathBuf>,
    pub dim: usize,
    pub n_max: usize,
    /// Remove the orbit-optimal Gaussian before counting.
    pub unwind: bool,
    /// Cubic reference used to find the Gaussian to remove.
    pub gamma: f64,
    pub theta: f64,
    pub search: SearchConfig,
    /// Island threshold as a fraction of the largest probability.
    pub island_threshold: f64,
}

impl Default for PhotonStatsConfig {
    fn default() -> Self {
        Self {
            state: StateSpec::Cubic {
                gamma: 0.4,
                theta: 0.0,
            },
            rho: None,
            dim: 128,
            n_max: 36,
            unwind: false,
            gamma: 0.4,
            theta: 0.0,
            search: SearchConfig::default(),
            island_threshold: DEFAULT_ISLAND_THRESHOLD,
        }
    }
}
