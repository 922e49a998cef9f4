//! Subcommand implementations. Each writes its outputs plus a manifest into
//! the output directory and returns a summary.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use cubicphase::analysis::{self, PhaseFit, WignerEvaluator, WignerGrid};
use cubicphase::fock::Mixture;
use cubicphase::gaussian::{self, GaussianParams, OrbitEngine};
use cubicphase::measurement::{postselect, HeterodyneSampler, SampleBatch};
use cubicphase::tomography::{maxlik_reconstruct, MaxLikOptions, MaxLikResult};
use cubicphase::{states, DensityMatrix, StateVector, C64};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{
    complex, derived_postselect_seed, FullModeConfig, Mode, PhaseSweepConfig, PhotonStatsConfig,
    ReconstructConfig, ScanConfig, SimulateConfig, StateSpec, WignerConfig,
};
use crate::error::{CliError, CliResult};
use crate::io::{self, Manifest};

/// Samples drawn per parallel job.
const CHUNK: u64 = 1 << 16;

fn ensure_dir(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)
        .map_err(|e| CliError::config(format!("{}: {e}", out.display())))
}

/// Raw heterodyne samples `0..n` of `state`, drawn in parallel chunks.
pub fn heterodyne_batch(state: &StateVector, n: usize, seed: u64, source: &str) -> CliResult<SampleBatch> {
    if n == 0 {
        return Err(CliError::config("sample count must be >= 1"));
    }
    let sampler = HeterodyneSampler::new(state)?;
    let n = n as u64;
    let chunks: Vec<u64> = (0..n.div_ceil(CHUNK)).collect();
    let parts = chunks
        .par_iter()
        .map(|&c| sampler.draw_range(seed, c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SampleBatch {
        samples: parts.into_iter().flatten().collect(),
        seed,
        source: source.to_string(),
        k: 0,
    })
}

/// Draws and postselects until `target` samples are accepted. Returns the
/// accepted batch and the number of raw samples consumed.
pub fn collect_accepted(
    state: &StateVector,
    k: usize,
    target: usize,
    seed: u64,
    postselect_seed: u64,
    source: &str,
) -> CliResult<(SampleBatch, u64)> {
    if target == 0 {
        return Err(CliError::config("accepted target must be >= 1"));
    }
    let sampler = HeterodyneSampler::new(state)?;
    let limit = (target as u64).saturating_mul(1_000_000);
    let mut accepted = Vec::with_capacity(target);
    let mut next = 0u64;
    while accepted.len() < target {
        if next >= limit {
            return Err(CliError::Numerical(format!(
                "only {} of {target} samples accepted after {next} draws",
                accepted.len()
            )));
        }
        let block: Vec<u64> = (0..8).map(|j| next + j * CHUNK).collect();
        let parts = block
            .par_iter()
            .map(|&s| sampler.draw_range(seed, s..s + CHUNK))
            .collect::<Result<Vec<_>, _>>()?;
        let raw = SampleBatch {
            samples: parts.into_iter().flatten().collect(),
            seed,
            source: source.to_string(),
            k: 0,
        };
        for (i, s) in postselect(&raw, k, postselect_seed).samples.iter().enumerate() {
            if s.accepted {
                accepted.push(*s);
                if accepted.len() == target {
                    next += i as u64 + 1;
                    return Ok((
                        SampleBatch {
                            samples: accepted,
                            seed,
                            source: source.to_string(),
                            k,
                        },
                        next,
                    ));
                }
            }
        }
        next += 8 * CHUNK;
    }
    unreachable!("loop exits by return")
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateReport {
    pub raw: usize,
    pub accepted: usize,
    pub success_probability: f64,
    pub samples: PathBuf,
    pub manifest: PathBuf,
}

/// Heterodyne sampling of `|α⟩` followed by `k`-photon postselection.
pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path) -> CliResult<SimulateReport> {
    ensure_dir(out)?;
    let alpha = complex(cfg.alpha);
    let state = states::coherent(alpha, cfg.dim)?;
    let source = format!("coherent({}{:+}i)", alpha.re, alpha.im);
    let raw = heterodyne_batch(&state, cfg.n, cfg.seed, &source)?;
    let post_seed = cfg.postselect_seed.unwrap_or(derived_postselect_seed(cfg.seed));
    let batch = postselect(&raw, cfg.k, post_seed);
    let samples = out.join("samples.csv");
    io::write_samples(&samples, &batch)?;
    let report = SimulateReport {
        raw: batch.len(),
        accepted: batch.accepted_count(),
        success_probability: batch.accepted_fraction(),
        samples: samples.clone(),
        manifest: out.join("simulate.manifest.json"),
    };
    let mut m = Manifest::new("simulate", cfg, Some(cfg.seed))?;
    m.outputs = vec!["samples.csv".into()];
    m.results = json!({
        "source": source,
        "k": cfg.k,
        "postselect_seed": post_seed,
        "raw": report.raw,
        "accepted": report.accepted,
        "success_probability": report.success_probability,
    });
    m.write(&report.manifest)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructReport {
    pub iterations: usize,
    pub loglikelihood: f64,
    pub converged: bool,
    pub accepted: usize,
    pub rho: PathBuf,
    pub manifest: PathBuf,
}

/// MaxLik reconstruction from the accepted rows of a sample CSV.
pub fn cmd_reconstruct(cfg: &ReconstructConfig, out: &Path) -> CliResult<ReconstructReport> {
    ensure_dir(out)?;
    let path = cfg
        .samples
        .as_ref()
        .ok_or_else(|| CliError::config("no sample file given"))?;
    let batch = io::read_samples(path)?;
    let accepted = batch.accepted_count();
    if accepted == 0 {
        return Err(CliError::config(format!(
            "{}: no accepted samples",
            path.display()
        )));
    }
    let res = maxlik_reconstruct(&batch, &cfg.maxlik)?;
    let rho_path = out.join("rho.json");
    io::write_density(&rho_path, &res.rho)?;
    let report = ReconstructReport {
        iterations: res.iterations,
        loglikelihood: res.loglikelihood,
        converged: res.converged,
        accepted,
        rho: rho_path,
        manifest: out.join("reconstruct.manifest.json"),
    };
    let mut m = Manifest::new("reconstruct", cfg, None)?;
    m.add_input(path)?;
    m.outputs = vec!["rho.json".into()];
    m.results = json!({
        "accepted": accepted,
        "iterations": res.iterations,
        "loglikelihood": res.loglikelihood,
        "converged": res.converged,
        "diluted_steps": res.diluted_steps,
    });
    m.write(&report.manifest)?;
    Ok(report)
}

/// State whose orbit fidelity is evaluated at one scan or sweep point.
pub fn point_state(
    alpha: C64,
    k: usize,
    dim: usize,
    mode: Mode,
    full: &FullModeConfig,
    seed: u64,
) -> CliResult<DensityMatrix> {
    match mode {
        Mode::Ideal => Ok(DensityMatrix::from_pure(&states::photon_added_coherent(
            alpha, k, dim,
        )?)?),
        Mode::Full => Ok(reconstruct_point(alpha, k, dim, full, seed)?.rho),
    }
}

/// Simulated experiment at one amplitude: sampling, postselection, MaxLik.
pub fn reconstruct_point(
    alpha: C64,
    k: usize,
    dim: usize,
    full: &FullModeConfig,
    seed: u64,
) -> CliResult<MaxLikResult> {
    let input = states::coherent(alpha, dim)?;
    let (batch, _) = collect_accepted(
        &input,
        k,
        full.accepted,
        seed,
        derived_postselect_seed(seed),
        "coherent",
    )?;
    let opts = MaxLikOptions {
        dim,
        ..full.maxlik.clone()
    };
    Ok(maxlik_reconstruct(&batch, &opts)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub re_alpha: f64,
    pub im_alpha: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub baseline: f64,
    pub baseline_params: GaussianParams,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

impl ScanReport {
    pub fn best(&self) -> Option<&ScanRow> {
        self.rows
            .iter()
            .fold(None, |b: Option<&ScanRow>, r| match b {
                Some(b) if b.fidelity >= r.fidelity => Some(b),
                _ => Some(r),
            })
    }
}

/// Orbit fidelity against the cubic state over a grid of coherent amplitudes.
pub fn cmd_scan(cfg: &ScanConfig, out: &Path) -> CliResult<ScanReport> {
    ensure_dir(out)?;
    cfg.search.validate()?;
    let mut points = Vec::new();
    for re in cfg.re_alpha.values()? {
        for im in cfg.im_alpha.values()? {
            points.push(C64::new(re, im));
        }
    }
    let engine = gaussian::engine_for(cfg.dim, &cfg.search)?;
    let baseline =
        gaussian::best_gaussian_fidelity_with(&engine, cfg.gamma, cfg.theta, cfg.dim, &cfg.search)?;
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, &alpha)| {
            let seed = cfg.full.seed.wrapping_add(i as u64);
            let rho = point_state(alpha, cfg.k, cfg.dim, cfg.mode, &cfg.full, seed)?;
            let fit = gaussian::orbit_fidelity_with(&engine, &rho, cfg.gamma, cfg.theta, &cfg.search)?;
            Ok(ScanRow {
                re_alpha: alpha.re,
                im_alpha: alpha.im,
                fidelity: fit.fidelity,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let csv = out.join("scan.csv");
    io::write_rows(&csv, &["re_alpha", "im_alpha", "fidelity"], &rows)?;
    let report = ScanReport {
        rows,
        baseline: baseline.fidelity,
        baseline_params: baseline.params,
        csv,
        manifest: out.join("scan.manifest.json"),
    };
    let mut m = Manifest::new("scan", cfg, Some(cfg.full.seed))?;
    m.outputs = vec!["scan.csv".into()];
    m.results = json!({
        "gaussian_baseline": report.baseline,
        "gaussian_baseline_params": report.baseline_params,
        "best": report.best(),
        "work_dim": engine.work_dim(),
        "note": "grid resolution and the inclusion of rotations are implementation choices",
    });
    m.write(&report.manifest)?;
    Ok(report)
}

/// A state read from a density-matrix file or built from a spec.
#[derive(Clone, Debug)]
pub enum LoadedState {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl LoadedState {
    pub fn load(spec: &StateSpec, rho: Option<&Path>, dim: usize) -> CliResult<Self> {
        match rho {
            Some(p) => Ok(LoadedState::Mixed(io::read_density(p)?)),
            None => Ok(LoadedState::Pure(spec.build(dim)?)),
        }
    }

    pub fn to_density(&self) -> CliResult<DensityMatrix> {
        match self {
            LoadedState::Pure(v) => Ok(DensityMatrix::from_pure(v)?),
            LoadedState::Mixed(r) => Ok(r.clone()),
        }
    }
}

impl Mixture for LoadedState {
    fn dim(&self) -> usize {
        match self {
            LoadedState::Pure(v) => v.dim(),
            LoadedState::Mixed(r) => r.dim(),
        }
    }

    fn components(&self) -> Vec<(f64, StateVector)> {
        match self {
            LoadedState::Pure(v) => v.components(),
            LoadedState::Mixed(r) => r.components(),
        }
    }

    fn populations(&self) -> Vec<f64> {
        match self {
            LoadedState::Pure(v) => v.populations(),
            LoadedState::Mixed(r) => r.populations(),
        }
    }

    fn density(&self) -> DMatrix<C64> {
        match self {
            LoadedState::Pure(v) => v.density(),
            LoadedState::Mixed(r) => r.density(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
struct WignerRow {
    x: f64,
    p: f64,
    w: f64,
}

/// Wigner function of a state on a grid, rows ordered x-major.
pub fn cmd_wigner(cfg: &WignerConfig, out: &Path) -> CliResult<WignerGrid> {
    ensure_dir(out)?;
    cfg.grid.validate()?;
    let state = LoadedState::load(&cfg.state, cfg.rho.as_deref(), cfg.dim)?;
    let eval = WignerEvaluator::new(&state);
    let x_axis = cfg.grid.x_axis();
    let p_axis = cfg.grid.p_axis();
    let values: Vec<Vec<f64>> = x_axis
        .par_iter()
        .map(|&x| p_axis.iter().map(|&p| eval.at(x, p)).collect())
        .collect();
    let grid = WignerGrid {
        x_axis,
        p_axis,
        step: cfg.grid.step,
        values,
    };
    let rows: Vec<WignerRow> = grid
        .x_axis
        .iter()
        .zip(&grid.values)
        .flat_map(|(&x, row)| {
            grid.p_axis
                .iter()
                .zip(row)
                .map(move |(&p, &w)| WignerRow { x, p, w })
        })
        .collect();
    io::write_rows(&out.join("wigner.csv"), &["x", "p", "w"], &rows)?;
    let mut m = Manifest::new("wigner", cfg, None)?;
    if let Some(p) = &cfg.rho {
        m.add_input(p)?;
    }
    let (min, neg_volume) = analysis::negativity(&grid);
    m.outputs = vec!["wigner.csv".into()];
    m.results = json!({
        "bounds": [cfg.grid.x_min, cfg.grid.x_max, cfg.grid.p_min, cfg.grid.p_max],
        "step": cfg.grid.step,
        "shape": [grid.x_axis.len(), grid.p_axis.len()],
        "integral": grid.integral(),
        "min": min,
        "negative_volume": neg_volume,
    });
    m.write(&out.join("wigner.manifest.json"))?;
    Ok(grid)
}

/// Reference angle and sign expected for a photon-added state whose
/// amplitude has phase `phase`: `(θ mod π, ±1)` of `exp(iγ x̂_{phase+π/2}³)`.
pub fn expected_reference(phase: f64) -> (f64, i32) {
    let psi = (phase + PI / 2.0).rem_euclid(2.0 * PI);
    if psi < PI - 1e-9 {
        (psi, 1)
    } else {
        let t = psi - PI;
        (if t.abs() < 1e-9 || (PI - t).abs() < 1e-9 { 0.0 } else { t }, -1)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseRow {
    pub phase: f64,
    pub theta_best: f64,
    pub sign: i32,
    pub fidelity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSweepReport {
    pub rows: Vec<PhaseRow>,
    pub params: Vec<GaussianParams>,
    /// Whether each fitted reference equals [`expected_reference`].
    pub matches_expected: Vec<bool>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Best cubic reference angle and sign for states at each amplitude phase.
pub fn cmd_phase_sweep(cfg: &PhaseSweepConfig, out: &Path) -> CliResult<PhaseSweepReport> {
    ensure_dir(out)?;
    cfg.search.validate()?;
    let search = gaussian::SearchConfig {
        include_rotation: false,
        ..cfg.search.clone()
    };
    let engine: OrbitEngine = gaussian::engine_for(cfg.dim, &search)?;
    let fits = cfg
        .phases
        .par_iter()
        .enumerate()
        .map(|(i, &phase)| {
            let alpha = C64::from_polar(cfg.amplitude, phase);
            let seed = cfg.full.seed.wrapping_add(i as u64);
            let rho = point_state(alpha, cfg.k, cfg.dim, cfg.mode, &cfg.full, seed)?;
            Ok(analysis::phase_fit_with(&engine, &rho, cfg.gamma, &search)?)
        })
        .collect::<CliResult<Vec<PhaseFit>>>()?;
    let rows: Vec<PhaseRow> = cfg
        .phases
        .iter()
        .zip(&fits)
        .map(|(&phase, f)| PhaseRow {
            phase,
            theta_best: f.theta,
            sign: f.sign,
            fidelity: f.fidelity,
        })
        .collect();
    let matches_expected: Vec<bool> = rows
        .iter()
        .map(|r| {
            let (t, s) = expected_reference(r.phase);
            (r.theta_best - t).abs() < 1e-9 && r.sign == s
        })
        .collect();
    let csv = out.join("phase_sweep.csv");
    io::write_rows(&csv, &["phase", "theta_best", "sign", "fidelity"], &rows)?;
    let report = PhaseSweepReport {
        rows,
        params: fits.iter().map(|f| f.params).collect(),
        matches_expected,
        csv,
        manifest: out.join("phase_sweep.manifest.json"),
    };
    let mut m = Manifest::new("phase-sweep", cfg, Some(cfg.full.seed))?;
    m.outputs = vec!["phase_sweep.csv".into()];
    m.results = json!({
        "params": report.params,
        "matches_expected": report.matches_expected,
        "expected": cfg.phases.iter().map(|&p| expected_reference(p)).collect::<Vec<_>>(),
    });
    m.write(&report.manifest)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct PhotonStatsReport {
    pub probabilities: Vec<f64>,
    pub islands: Vec<(usize, usize)>,
    /// Removed Gaussian and the orbit fidelity that selected it.
    pub unwinding: Option<(GaussianParams, f64)>,
    pub csv: PathBuf,
    pub islands_csv: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Clone, Debug, Serialize)]
struct PhotonRow {
    n: usize,
    p: f64,
}

#[derive(Clone, Debug, Serialize)]
struct IslandRow {
    start: usize,
    end: usize,
}

/// Photon-number distribution and its islands, optionally after removing
/// the orbit-optimal Gaussian.
pub fn cmd_photon_stats(cfg: &PhotonStatsConfig, out: &Path) -> CliResult<PhotonStatsReport> {
    ensure_dir(out)?;
    if !(cfg.island_threshold > 0.0) {
        return Err(CliError::config("island threshold must be > 0"));
    }
    let state = LoadedState::load(&cfg.state, cfg.rho.as_deref(), cfg.dim)?;
    let (probabilities, unwinding) = if cfg.unwind {
        let rho = state.to_density()?;
        let engine = gaussian::engine_for(rho.dim(), &cfg.search)?;
        let fit = gaussian::orbit_fidelity_with(&engine, &rho, cfg.gamma, cfg.theta, &cfg.search)?;
        let probs = analysis::unwound_statistics(&rho, &fit.params, engine.work_dim(), cfg.n_max)?;
        (probs, Some((fit.params, fit.fidelity)))
    } else {
        (analysis::photon_statistics(&state, cfg.n_max)?, None)
    };
    let islands = analysis::islands_relative(&probabilities, cfg.island_threshold);
    let csv = out.join("photon_stats.csv");
    let rows: Vec<PhotonRow> = probabilities
        .iter()
        .enumerate()
        .map(|(n, &p)| PhotonRow { n, p })
        .collect();
    io::write_rows(&csv, &["n", "p"], &rows)?;
    let islands_csv = out.join("islands.csv");
    let irows: Vec<IslandRow> = islands
        .iter()
        .map(|&(start, end)| IslandRow { start, end })
        .collect();
    io::write_rows(&islands_csv, &["start", "end"], &irows)?;
    let report = PhotonStatsReport {
        probabilities,
        islands,
        unwinding,
        csv,
        islands_csv,
        manifest: out.join("photon_stats.manifest.json"),
    };
    let mut m = Manifest::new("photon-stats", cfg, None)?;
    if let Some(p) = &cfg.rho {
        m.add_input(p)?;
    }
    m.outputs = vec!["photon_stats.csv".into(), "islands.csv".into()];
    m.results = json!({
        "islands": report.islands,
        "unwinding": report.unwinding,
        "sum": report.probabilities.iter().sum::<f64>(),
    });
    m.write(&report.manifest)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expected_reference_pattern() {
        // Amplitude phases 0, π/2, π, 3π/2 → (p̂³,+), (x̂³,−), (p̂³,−), (x̂³,+).
        let got: Vec<(f64, i32)> = [0.0, PI / 2.0, PI, 1.5 * PI]
            .iter()
            .map(|&p| expected_reference(p))
            .collect();
        let want = [(PI / 2.0, 1), (0.0, -1), (PI / 2.0, -1), (0.0, 1)];
        for (g, w) in got.iter().zip(want) {
            assert!((g.0 - w.0).abs() < 1e-12 && g.1 == w.1, "{g:?} {w:?}");
        }
    }
}
