//! Derived quantities: Wigner grids, fidelity, photon statistics with island
//! detection, Wigner negativity and the cubic-reference phase fit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, Mixture, StateVector, C64};
use crate::gaussian::{self, GaussianParams, OrbitEngine, SearchConfig};
use crate::states;

/// Island threshold relative to the largest probability.
pub const DEFAULT_ISLAND_THRESHOLD: f64 = 5e-5;

/// Uniform phase-space grid in ħ=2 quadrature units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(6.0, 0.06)
    }
}

impl GridSpec {
    /// `[−half, half]²`.
    pub fn square(half: f64, step: f64) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            p_min: -half,
            p_max: half,
            step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.x_min, self.x_max, self.p_min, self.p_max, self.step];
        if !all.iter().all(|v| v.is_finite()) {
            return Err(Error::Config("grid bounds must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::Config("grid step must be > 0".into()));
        }
        if self.x_min > self.x_max || self.p_min > self.p_max {
            return Err(Error::Config("grid bounds are reversed".into()));
        }
        Ok(())
    }

    fn axis(min: f64, max: f64, step: f64) -> Vec<f64> {
        let n = ((max - min) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| min + step * i as f64).collect()
    }

    pub fn x_axis(&self) -> Vec<f64> {
        Self::axis(self.x_min, self.x_max, self.step)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        Self::axis(self.p_min, self.p_max, self.step)
    }
}

/// Wigner values `values[i][j] = W(x_axis[i], p_axis[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub step: f64,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        self.step * self.step
    }

    /// Riemann sum of `W` times the cell area.
    pub fn integral(&self) -> f64 {
        self.values.iter().flatten().sum::<f64>() * self.cell_area()
    }

    /// `∫W dp` at each `x_axis` point.
    pub fn x_marginal(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| row.iter().sum::<f64>() * self.step)
            .collect()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `W(x, p)` of a fixed state.
#[derive(Clone, Debug)]
pub struct WignerEvaluator {
    rho: DMatrix<C64>,
}

impl WignerEvaluator {
    pub fn new<S: Mixture + ?Sized>(state: &S) -> Self {
        Self {
            rho: state.density(),
        }
    }

    /// `W(x, p) = Σ_{m,n} ρ_{mn} W_{mn}(x, p)` with the Fock-basis kernels
    /// built by upward recurrence in `m` and `n`.
    pub fn at(&self, x: f64, p: f64) -> f64 {
        let d = self.rho.nrows();
        let a = C64::new(x / 2.0, p / 2.0);
        let ac = a.conj();
        let sq: Vec<f64> = (0..d).map(|n| (n as f64).sqrt()).collect();
        let mut w: Vec<C64> = vec![C64::new(0.0, 0.0); d];
        w[0] = C64::new((-2.0 * a.norm_sqr()).exp() / PI, 0.0);
        let mut total = self.rho[(0, 0)].re * w[0].re;
        for n in 1..d {
            w[n] = 2.0 * a * w[n - 1] / sq[n];
            total += 2.0 * (self.rho[(0, n)] * w[n]).re;
        }
        for m in 1..d {
            let mut temp = w[m];
            w[m] = (2.0 * ac * temp - sq[m] * w[m - 1]) / sq[m];
            total += (self.rho[(m, m)] * w[m]).re;
            for n in m + 1..d {
                let next = (2.0 * a * w[n - 1] - sq[m] * temp) / sq[n];
                temp = w[n];
                w[n] = next;
                total += 2.0 * (self.rho[(m, n)] * w[n]).re;
            }
        }
        0.5 * total
    }
}

/// Wigner function on a grid.
pub fn wigner<S: Mixture + ?Sized>(state: &S, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let eval = WignerEvaluator::new(state);
    let x_axis = spec.x_axis();
    let p_axis = spec.p_axis();
    let values = x_axis
        .iter()
        .map(|&x| p_axis.iter().map(|&p| eval.at(x, p)).collect())
        .collect();
    Ok(WignerGrid {
        x_axis,
        p_axis,
        step: spec.step,
        values,
    })
}

/// `⟨ψ|ρ|ψ⟩`. A `ψ` carrying a truncation tail is used as is.
pub fn fidelity<S: Mixture + ?Sized>(rho: &S, psi: &StateVector) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: psi.dim(),
        });
    }
    let m = rho.density();
    let v = psi.as_dvector();
    Ok(v.dotc(&(&m * v)).re)
}

/// `p_n` for `n = 0..=n_max`, negatives clipped to zero.
pub fn photon_statistics<S: Mixture + ?Sized>(state: &S, n_max: usize) -> Result<Vec<f64>> {
    if n_max >= state.dim() {
        return Err(Error::OutOfRange {
            index: n_max,
            dim: state.dim(),
        });
    }
    Ok(state
        .populations()
        .into_iter()
        .take(n_max + 1)
        .map(|p| p.max(0.0))
        .collect())
}

/// Maximal runs of entries above `threshold`, as inclusive `(start, end)`.
pub fn islands(probs: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (n, &p) in probs.iter().enumerate() {
        match (p > threshold, start) {
            (true, None) => start = Some(n),
            (false, Some(s)) => {
                out.push((s, n - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, probs.len() - 1));
    }
    out
}

/// [`islands`] with the threshold given as a fraction of the largest entry.
pub fn islands_relative(probs: &[f64], rel: f64) -> Vec<(usize, usize)> {
    let max = probs.iter().copied().fold(0.0, f64::max);
    islands(probs, rel * max)
}

/// `(min W, Σ |W_−| · cell area)`.
pub fn negativity(grid: &WignerGrid) -> (f64, f64) {
    let neg: f64 = grid
        .values
        .iter()
        .flatten()
        .filter(|v| **v < 0.0)
        .map(|v| -v)
        .sum();
    (grid.min(), neg * grid.cell_area())
}

/// Best cubic reference `exp(i·sign·γ·x̂_θ³)|0⟩` for a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    /// Canonical angle in `[0, π)`.
    pub theta: f64,
    pub sign: i32,
    pub fidelity: f64,
    pub params: GaussianParams,
}

/// Reference angles tried by [`phase_fit`]: `kπ/8` in `[0, π)`. Together
/// with the sign this covers all of `{0, π/8, ..., 15π/8} × {±1}`, since
/// `x̂_{θ+π} = −x̂_θ`.
pub fn phase_fit_angles() -> Vec<f64> {
    (0..8).map(|k| k as f64 * PI / 8.0).collect()
}

/// Maximizes the orbit fidelity over the reference angle and the sign of `γ`.
///
/// The orbit excludes rotations here; a rotation would make every angle
/// equivalent.
pub fn phase_fit(rho: &fock::DensityMatrix, gamma: f64, cfg: &SearchConfig) -> Result<PhaseFit> {
    let cfg = SearchConfig {
        include_rotation: false,
        ..cfg.clone()
    };
    let engine = gaussian::engine_for(rho.dim(), &cfg)?;
    phase_fit_with(&engine, rho, gamma, &cfg)
}

pub fn phase_fit_with(
    engine: &OrbitEngine,
    rho: &fock::DensityMatrix,
    gamma: f64,
    cfg: &SearchConfig,
) -> Result<PhaseFit> {
    let cfg = SearchConfig {
        include_rotation: false,
        ..cfg.clone()
    };
    let mut best: Option<PhaseFit> = None;
    for theta in phase_fit_angles() {
        for sign in [1i32, -1] {
            let fit = gaussian::orbit_fidelity_with(engine, rho, sign as f64 * gamma, theta, &cfg)?;
            if best.as_ref().is_none_or(|b| fit.fidelity > b.fidelity) {
                best = Some(PhaseFit {
                    theta,
                    sign,
                    fidelity: fit.fidelity,
                    params: fit.params,
                });
            }
        }
    }
    best.ok_or_else(|| Error::Config("no reference angles".into()))
}

/// Photon statistics after removing the orbit-optimal Gaussian, evaluated in
/// the engine workspace.
pub fn unwound_statistics(
    rho: &fock::DensityMatrix,
    params: &GaussianParams,
    work_dim: usize,
    n_max: usize,
) -> Result<Vec<f64>> {
    let un = gaussian::unwind_in(rho, params, work_dim)?;
    photon_statistics(&un, n_max)
}

/// Vacuum-normalized reference used by the phase sweep and tests.
pub fn cubic_reference(gamma: f64, theta: f64, dim: usize) -> Result<StateVector> {
    Ok(states::cubic_phase_state(gamma, theta, dim)?.state)
}
