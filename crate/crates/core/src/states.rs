//! Constructors for the named states: Fock, coherent, photon-added coherent
//! and cubic phase states.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::fock::{self, HermitianSpectrum, StateVector, C64};

/// Maximum Poisson tail a truncated coherent state may drop.
pub const COHERENT_TAIL_BUDGET: f64 = 1e-10;
/// Default tail budget for cubic phase states projected to the caller's dim.
pub const CUBIC_TAIL_BUDGET: f64 = 5e-2;
/// Smallest internal workspace used to evolve cubic states.
pub const CUBIC_MIN_WORK_DIM: usize = 256;

pub fn vacuum(dim: usize) -> Result<StateVector> {
    StateVector::basis(0, dim)
}

pub fn fock(n: usize, dim: usize) -> Result<StateVector> {
    StateVector::basis(n, dim)
}

/// Unnormalized coherent amplitudes `e^{−|α|²/2} αⁿ/√n!` for `n < len`.
fn coherent_amps(alpha: C64, len: usize) -> Vec<C64> {
    let mut amps = Vec::with_capacity(len);
    let mut term = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for n in 0..len {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        amps.push(term);
    }
    amps
}

/// Poisson mass `P(N ≥ cut)` for mean `mean`, summed from the tail side.
fn poisson_tail(mean: f64, cut: usize) -> f64 {
    if mean == 0.0 {
        return if cut == 0 { 1.0 } else { 0.0 };
    }
    // log p_cut via lgamma-free accumulation of log terms.
    let mut log_p = -mean;
    for n in 1..=cut {
        log_p += mean.ln() - (n as f64).ln();
    }
    let mut p = log_p.exp();
    let mut total = 0.0;
    let mut n = cut;
    loop {
        total += p;
        n += 1;
        p *= mean / n as f64;
        if n as f64 > mean && p < total * 1e-17 {
            break;
        }
        if p == 0.0 && n as f64 > mean {
            break;
        }
    }
    total
}

/// Smallest truncation keeping the coherent tail below `budget`.
pub fn coherent_min_dim(alpha: C64, budget: f64) -> usize {
    let mean = alpha.norm_sqr();
    let mut dim = 1;
    while poisson_tail(mean, dim) >= budget {
        dim += 1;
    }
    dim
}

/// Coherent state `|α⟩`; fails if the truncation drops more than
/// [`COHERENT_TAIL_BUDGET`] of the Poisson distribution.
pub fn coherent(alpha: C64, dim: usize) -> Result<StateVector> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "state vectors need dim >= 1",
        });
    }
    let tail = poisson_tail(alpha.norm_sqr(), dim);
    if tail >= COHERENT_TAIL_BUDGET {
        return Err(Error::TruncationTooSmall {
            dim,
            tail,
            budget: COHERENT_TAIL_BUDGET,
            min_dim: coherent_min_dim(alpha, COHERENT_TAIL_BUDGET),
        });
    }
    StateVector::from_amps(coherent_amps(alpha, dim))
}

/// `normalize((â†)^k |α⟩)`.
///
/// Amplitudes are filled from the closed form
/// `e^{−|α|²/2} α^{n−k} √(n!)/(n−k)!` for `n ≥ k`, then normalized over the
/// truncated support.
pub fn photon_added_coherent(alpha: C64, k: usize, dim: usize) -> Result<StateVector> {
    if dim <= k {
        return Err(Error::InvalidDimension {
            dim,
            reason: "dim must exceed the number of added photons",
        });
    }
    let tail = poisson_tail(alpha.norm_sqr(), dim - k);
    if tail >= COHERENT_TAIL_BUDGET {
        return Err(Error::TruncationTooSmall {
            dim,
            tail,
            budget: COHERENT_TAIL_BUDGET,
            min_dim: coherent_min_dim(alpha, COHERENT_TAIL_BUDGET) + k,
        });
    }
    let base = coherent_amps(alpha, dim - k);
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    for (m, c) in base.into_iter().enumerate() {
        let n = m + k;
        let lift: f64 = ((m + 1)..=n).map(|j| (j as f64).sqrt()).product();
        amps[n] = c * lift;
    }
    fock::normalize(&StateVector::from_amps(amps)?)
}

/// `‖(â†)^k|α⟩‖² = k!·L_k(−|α|²)` for the untruncated state.
pub fn photon_added_norm_sqr(alpha: C64, k: usize) -> f64 {
    // L_k(−t) by the three-term recurrence.
    let t = -alpha.norm_sqr();
    let (mut prev, mut cur) = (1.0, 1.0 - t);
    if k == 0 {
        return 1.0;
    }
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 - t) * cur - jf * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    fact * cur
}

/// Options for [`cubic_phase_state_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicOptions {
    /// Largest squared norm allowed beyond the requested dimension.
    pub tail_budget: f64,
    /// Workspace dimension; `None` uses `max(2·dim, CUBIC_MIN_WORK_DIM)`.
    pub work_dim: Option<usize>,
}

impl Default for CubicOptions {
    fn default() -> Self {
        Self {
            tail_budget: CUBIC_TAIL_BUDGET,
            work_dim: None,
        }
    }
}

/// Cubic phase state projected to the caller's dimension, with the squared
/// norm it lost in the projection.
#[derive(Clone, Debug)]
pub struct CubicState {
    pub state: StateVector,
    pub tail_mass: f64,
    pub work_dim: usize,
}

pub fn cubic_work_dim(dim: usize) -> usize {
    (2 * dim).max(CUBIC_MIN_WORK_DIM)
}

/// `x̂³` restricted to `|0⟩..|dim−1⟩`, taken from the cube of a slightly
/// larger `x̂` so that every kept matrix element is exact.
pub fn cubed_quadrature(dim: usize) -> Result<fock::FockOperator> {
    fock::quadrature(0.0, dim + 3)?.pow(3).truncated(dim)
}

fn cubic_spectrum(work_dim: usize) -> Result<Arc<HermitianSpectrum>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HermitianSpectrum>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(spec) = cache.lock().expect("cubic spectrum cache").get(&work_dim) {
        return Ok(Arc::clone(spec));
    }
    let spec = Arc::new(HermitianSpectrum::new(&cubed_quadrature(work_dim)?)?);
    cache
        .lock()
        .expect("cubic spectrum cache")
        .insert(work_dim, Arc::clone(&spec));
    Ok(spec)
}

/// `exp(iγ x̂_θ³)|0⟩` at the full workspace dimension, unprojected.
///
/// Uses `x̂_θ = e^{iθn̂} x̂ e^{−iθn̂}`, which holds exactly for the truncated
/// operators, so one diagonalization of `x̂³` serves every angle.
pub fn cubic_phase_workspace(gamma: f64, theta: f64, work_dim: usize) -> Result<StateVector> {
    if work_dim < 2 {
        return Err(Error::InvalidDimension {
            dim: work_dim,
            reason: "cubic workspace needs dim >= 2",
        });
    }
    let spec = cubic_spectrum(work_dim)?;
    let evolved = spec.apply_exp_i(gamma, &vacuum(work_dim)?)?;
    Ok(evolved.rotated(-theta))
}

pub fn cubic_phase_state(gamma: f64, theta: f64, dim: usize) -> Result<CubicState> {
    cubic_phase_state_with(gamma, theta, dim, CubicOptions::default())
}

/// Cubic phase state evolved in a larger workspace and projected to `dim`
/// without renormalization.
pub fn cubic_phase_state_with(
    gamma: f64,
    theta: f64,
    dim: usize,
    opts: CubicOptions,
) -> Result<CubicState> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "cubic states need dim >= 2",
        });
    }
    let work_dim = opts.work_dim.unwrap_or_else(|| cubic_work_dim(dim));
    if work_dim < dim {
        return Err(Error::InvalidDimension {
            dim: work_dim,
            reason: "workspace must be at least the requested dimension",
        });
    }
    let full = cubic_phase_workspace(gamma, theta, work_dim)?;
    let tail = full.tail_mass_from(dim);
    if tail > opts.tail_budget {
        let min_dim = (dim..=work_dim)
            .find(|&d| full.tail_mass_from(d) <= opts.tail_budget)
            .unwrap_or(work_dim + 1);
        return Err(Error::TruncationTooSmall {
            dim,
            tail,
            budget: opts.tail_budget,
            min_dim,
        });
    }
    Ok(CubicState {
        state: full.resized(dim)?,
        tail_mass: tail,
        work_dim,
    })
}

/// `normalize(|0⟩ + 3iγ|1⟩ + √6 iγ|3⟩)`, the first-order cubic state.
pub fn perturbative_cubic(gamma: f64, dim: usize) -> Result<StateVector> {
    if dim < 4 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "perturbative cubic state needs dim >= 4",
        });
    }
    fock::normalize(&perturbative_cubic_unnormalized(gamma, dim))
}

fn perturbative_cubic_unnormalized(gamma: f64, dim: usize) -> StateVector {
    let mut amps = vec![C64::new(0.0, 0.0); dim];
    amps[0] = C64::new(1.0, 0.0);
    amps[1] = C64::new(0.0, 3.0 * gamma);
    amps[3] = C64::new(0.0, 6f64.sqrt() * gamma);
    StateVector::from_dvector(nalgebra::DVector::from_vec(amps))
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Position-space reference for cubic phase states: the wavefunction
    //! `(2π)^{-1/4} e^{−x²/4} e^{iγx³}` (ħ = 2) projected onto Hermite
    //! functions by trapezoidal quadrature.

    use super::C64;

    /// Hermite functions `⟨x|n⟩` in ħ = 2 units for `n < count`.
    pub fn hermite_functions(count: usize, x: f64) -> Vec<f64> {
        let u = x / 2f64.sqrt();
        let mut out = Vec::with_capacity(count);
        let h0 = std::f64::consts::PI.powf(-0.25) * (-u * u / 2.0).exp();
        out.push(h0);
        if count > 1 {
            out.push(2f64.sqrt() * u * h0);
        }
        for n in 2..count {
            let nf = n as f64;
            let v = (2.0 / nf).sqrt() * u * out[n - 1] - ((nf - 1.0) / nf).sqrt() * out[n - 2];
            out.push(v);
        }
        let s = 2f64.powf(-0.25);
        out.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn cubic_amplitudes(gamma: f64, count: usize) -> Vec<C64> {
        let (lo, hi, step) = (-24.0f64, 24.0f64, 2e-3f64);
        let npts = ((hi - lo) / step).round() as usize + 1;
        let mut acc = vec![C64::new(0.0, 0.0); count];
        let norm = (2.0 * std::f64::consts::PI).powf(-0.25);
        for i in 0..npts {
            let x = lo + step * i as f64;
            let w = if i == 0 || i == npts - 1 { 0.5 } else { 1.0 };
            let psi = C64::from_polar(norm * (-x * x / 4.0).exp(), gamma * x * x * x);
            for (a, h) in acc.iter_mut().zip(hermite_functions(count, x)) {
                *a += psi * (h * w * step);
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{expect, inner, number};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn basis_states() {
        let v = vacuum(8).unwrap();
        assert_eq!(v.amps()[0], c(1.0, 0.0));
        assert!(v.amps()[1..].iter().all(|a| *a == c(0.0, 0.0)));
        let f = fock(3, 8).unwrap();
        assert_eq!(f.amps()[3], c(1.0, 0.0));
        assert!(matches!(fock(3, 2), Err(Error::OutOfRange { index: 3, dim: 2 })));
    }

    #[test]
    fn coherent_basics() {
        assert_eq!(coherent(c(0.0, 0.0), 8).unwrap(), vacuum(8).unwrap());
        let psi = coherent(c(0.0, -0.97), 64).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
        let brute: f64 = psi
            .probabilities()
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum();
        assert!((brute - 0.9409).abs() < 1e-8);
        let e = expect(&psi, &number(64).unwrap()).unwrap().re;
        assert!((e - 0.9409).abs() < 1e-8);
        let p = coherent(c(1.0, 0.0), 64).unwrap().probabilities();
        assert!((p[0] - (-1.0f64).exp()).abs() < 1e-15);
        // Poisson p_n = e^{-1}/n!
        let mut fact = 1.0;
        for (n, pn) in p.iter().enumerate().take(20) {
            if n > 0 {
                fact *= n as f64;
            }
            assert!((pn - (-1.0f64).exp() / fact).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_truncation_error_names_dimension() {
        let err = coherent(c(3.0, 0.0), 10).unwrap_err();
        match err {
            Error::TruncationTooSmall { min_dim, .. } => {
                assert!(coherent(c(3.0, 0.0), min_dim).is_ok());
                assert!(coherent(c(3.0, 0.0), min_dim - 1).is_err());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn poisson_tail_against_direct_sum() {
        for mean in [0.25, 1.0, 4.0] {
            for cut in [2usize, 5, 12] {
                let mut p = (-mean as f64).exp();
                let mut head = 0.0;
                for n in 0..cut {
                    if n > 0 {
                        p *= mean / n as f64;
                    }
                    head += p;
                }
                assert!((poisson_tail(mean, cut) - (1.0 - head)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn photon_added_limits_and_norms() {
        let pac = photon_added_coherent(c(0.0, 0.0), 3, 16).unwrap();
        assert!((inner(&pac, &fock(3, 16).unwrap()).unwrap().norm() - 1.0).abs() < 1e-14);
        let k0 = photon_added_coherent(c(0.4, 0.2), 0, 32).unwrap();
        let coh = coherent(c(0.4, 0.2), 32).unwrap();
        assert!((inner(&k0, &coh).unwrap().norm_sqr() - 1.0).abs() < 1e-10);

        // Brute force ‖â†|α⟩‖² over the Fock sum for α = 1, k = 1.
        let alpha = c(1.0, 0.0);
        let coh = coherent(alpha, 80).unwrap();
        let lifted = fock::apply(&fock::creation(80).unwrap(), &coh).unwrap();
        assert!((lifted.norm_sqr() - 2.0).abs() < 1e-10);
        assert!((photon_added_norm_sqr(alpha, 1) - 2.0).abs() < 1e-14);
        for k in 0..5 {
            let alpha = c(0.3, -0.9);
            let mut v = coherent(alpha, 90).unwrap();
            for _ in 0..k {
                v = fock::apply(&fock::creation(90).unwrap(), &v).unwrap();
            }
            assert!((v.norm_sqr() - photon_added_norm_sqr(alpha, k)).abs() < 1e-9);
        }
    }

    #[test]
    fn photon_added_closed_form_amplitudes() {
        let alpha = c(0.0, -0.97);
        let k = 3;
        let pac = photon_added_coherent(alpha, k, 64).unwrap();
        let norm = photon_added_norm_sqr(alpha, k).sqrt();
        for n in 0..64usize {
            let expected = if n < k {
                c(0.0, 0.0)
            } else {
                let m = n - k;
                let log_mag = -alpha.norm_sqr() / 2.0 + (m as f64) * alpha.norm().ln()
                    + 0.5 * ln_fact(n)
                    - ln_fact(m);
                C64::from_polar(log_mag.exp(), m as f64 * alpha.arg()) / norm
            };
            assert!((pac.amps()[n] - expected).norm() < 1e-12, "n={n}");
        }
    }

    fn ln_fact(n: usize) -> f64 {
        (1..=n).map(|j| (j as f64).ln()).sum()
    }

    #[test]
    fn cubic_zero_gamma_is_vacuum() {
        let cs = cubic_phase_state(0.0, 0.3, 12).unwrap();
        assert!((cs.state.amps()[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(cs.tail_mass < 1e-24);
        assert_eq!(cs.state.dim(), 12);
    }

    #[test]
    fn cubic_matches_position_space_oracle() {
        for gamma in [0.1, 0.4] {
            let oracle = oracle::cubic_amplitudes(gamma, 64);
            let cs = cubic_phase_state(gamma, 0.0, 64).unwrap();
            let dev = cs
                .state
                .amps()
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let tol = if gamma < 0.2 { 1e-8 } else { 2e-3 };
            assert!(dev < tol, "gamma={gamma} dev={dev}");
            let oracle_tail = 1.0 - oracle.iter().map(|a| a.norm_sqr()).sum::<f64>();
            assert!((cs.tail_mass - oracle_tail).abs() < 1e-3 * (1.0 + oracle_tail));
        }
    }

    #[test]
    fn cubic_weak_limit() {
        let weak = |gamma: f64| {
            let cs = cubic_phase_state(gamma, 0.0, 64).unwrap();
            inner(&perturbative_cubic(gamma, 64).unwrap(), &cs.state)
                .unwrap()
                .norm_sqr()
        };
        assert!(weak(0.02) > 0.999);
        assert!((weak(0.05) - 0.989_212_589_594).abs() < 1e-8);
    }

    #[test]
    fn cubic_direct_rotation_route_agrees() {
        // exp(iγ x̂_θ³)|0⟩ built from the rotated generator itself.
        let dim = 48;
        let theta = 0.7;
        let gen = fock::quadrature(theta, dim + 3)
            .unwrap()
            .pow(3)
            .truncated(dim)
            .unwrap();
        let direct = fock::apply(
            &fock::expm_hermitian(&gen, 0.2).unwrap(),
            &vacuum(dim).unwrap(),
        )
        .unwrap();
        let opts = CubicOptions {
            tail_budget: 1.0,
            work_dim: Some(dim),
        };
        let rotated = cubic_phase_state_with(0.2, theta, dim, opts).unwrap();
        let dev = direct
            .amps()
            .iter()
            .zip(rotated.state.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn cubic_tail_budget_enforced() {
        let strict = CubicOptions {
            tail_budget: 1e-6,
            work_dim: None,
        };
        match cubic_phase_state_with(0.4, 0.0, 40, strict) {
            Err(Error::TruncationTooSmall { tail, min_dim, .. }) => {
                assert!(tail > 0.02);
                assert!(min_dim > 40);
            }
            other => panic!("unexpected {other:?}"),
        }
        let cs = cubic_phase_state(0.4, 0.0, 40).unwrap();
        assert!((cs.tail_mass - 0.0256).abs() < 1e-3);
        assert!(cs.tail_mass < CUBIC_TAIL_BUDGET);
    }

    #[test]
    fn cubic_conjugate_symmetry() {
        let plus = cubic_phase_state(0.3, 0.0, 40).unwrap().state;
        let minus = cubic_phase_state(-0.3, 0.0, 40).unwrap().state;
        let dev = plus
            .conj()
            .amps()
            .iter()
            .zip(minus.amps())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn cubic_mean_photon_number_grows_with_gamma() {
        let mut last = -1.0;
        for i in 0..=10 {
            let gamma = 0.05 * i as f64;
            let st = cubic_phase_workspace(gamma, 0.0, 256).unwrap();
            let mean: f64 = st
                .probabilities()
                .iter()
                .enumerate()
                .map(|(n, p)| n as f64 * p)
                .sum();
            assert!(mean >= last - 1e-12, "gamma={gamma}");
            last = mean;
        }
    }

    #[test]
    fn perturbative_state() {
        assert_eq!(perturbative_cubic(0.0, 4).unwrap(), vacuum(4).unwrap());
        assert!(perturbative_cubic(0.1, 3).is_err());
        let g = 0.035;
        let raw = perturbative_cubic_unnormalized(g, 8);
        assert!((raw.norm_sqr() - (1.0 + 15.0 * g * g)).abs() < 1e-15);
        let fid = |gamma: f64| {
            let cs = cubic_phase_state(gamma, 0.0, 64).unwrap();
            inner(&perturbative_cubic(gamma, 64).unwrap(), &cs.state)
                .unwrap()
                .norm_sqr()
        };
        assert!(fid(0.4) < fid(0.1));
    }

    #[test]
    fn output_dimensions_match_request() {
        for dim in [8usize, 17, 40] {
            assert_eq!(coherent(c(0.1, 0.2), dim).unwrap().dim(), dim);
            assert_eq!(photon_added_coherent(c(0.1, 0.2), 2, dim).unwrap().dim(), dim);
            assert_eq!(cubic_phase_state(0.1, 0.0, dim.max(20)).unwrap().state.dim(), dim.max(20));
            assert_eq!(perturbative_cubic(0.1, dim).unwrap().dim(), dim);
        }
    }
}
