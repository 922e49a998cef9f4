//! Gaussian unitaries and the grid search over the Gaussian orbit of a
//! cubic phase state.
//!
//! A Gaussian group element is `G = D(α)·S(r, φ)·R(ϑ)` with
//!
//! * `D(α) = exp(α â† − α* â)`,
//! * `S(r, φ) = exp((ζ* â² − ζ â†²)/2)`, `ζ = r e^{iφ}`,
//! * `R(ϑ) = exp(−iϑ n̂)`.
//!
//! The orbit search never forms `G` as a matrix. It diagonalizes `x̂` and the
//! squeeze generator once per workspace dimension and moves the phase
//! dependence into diagonal rotations:
//! `D(s e^{iψ}) = e^{i(ψ+π/2)n̂} e^{−isx̂} e^{−i(ψ+π/2)n̂}` and
//! `S(r, φ) = e^{iφn̂/2} S(r, 0) e^{−iφn̂/2}`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    self, annihilation, creation, DensityMatrix, FockOperator, HermitianSpectrum, StateVector, C64,
};
use crate::states;

/// Largest squeezed-vacuum tail accepted by [`squeeze_op`].
pub const SQUEEZE_TAIL_BUDGET: f64 = 1e-8;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

/// Parameters of `D(disp)·S(squeeze_r, squeeze_phi)·R(rot)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub disp: C64,
    pub squeeze_r: f64,
    pub squeeze_phi: f64,
    pub rot: f64,
}

impl Default for GaussianParams {
    fn default() -> Self {
        Self::identity()
    }
}

impl GaussianParams {
    pub fn identity() -> Self {
        Self {
            disp: C64::new(0.0, 0.0),
            squeeze_r: 0.0,
            squeeze_phi: 0.0,
            rot: 0.0,
        }
    }

    /// Validates `r ≥ 0` and stores both angles in `(−π, π]`.
    pub fn new(disp: C64, squeeze_r: f64, squeeze_phi: f64, rot: f64) -> Result<Self> {
        if !(squeeze_r >= 0.0) || !squeeze_r.is_finite() {
            return Err(Error::Config(format!(
                "squeeze magnitude must be finite and >= 0, got {squeeze_r}"
            )));
        }
        if !(disp.re.is_finite() && disp.im.is_finite() && squeeze_phi.is_finite() && rot.is_finite())
        {
            return Err(Error::Config("gaussian parameters must be finite".into()));
        }
        Ok(Self {
            disp,
            squeeze_r,
            squeeze_phi: wrap_angle(squeeze_phi),
            rot: wrap_angle(rot),
        })
    }

    pub fn displacement(alpha: C64) -> Self {
        Self {
            disp: alpha,
            ..Self::identity()
        }
    }

}

/// `D(α)` on the truncated space.
pub fn displacement_op(alpha: C64, dim: usize) -> Result<FockOperator> {
    // Same truncation precondition as the coherent state it produces.
    states::coherent(alpha, dim)?;
    let a = annihilation(dim)?;
    let ad = creation(dim)?;
    // exp(αâ† − α*â) = exp(i·H), H = −i(αâ† − α*â).
    let gen = ad
        .scaled(alpha)
        .add(&a.scaled(-alpha.conj()))?
        .scaled(C64::new(0.0, -1.0));
    fock::expm_hermitian(&gen, 1.0)
}

/// Squared norm of the squeezed vacuum `S(r)|0⟩` carried by `n ≥ cut`.
pub fn squeezed_vacuum_tail(r: f64, cut: usize) -> f64 {
    let t2 = r.tanh().powi(2);
    if t2 == 0.0 {
        return if cut == 0 { 1.0 } else { 0.0 };
    }
    // |c_{2m}|² = t^{2m} (2m)! / (4^m (m!)²) / cosh r
    let mut m = 0usize;
    let mut p = 1.0 / r.cosh();
    let mut total = 0.0;
    loop {
        if 2 * m >= cut {
            total += p;
        }
        let mf = m as f64;
        p *= t2 * (2.0 * mf + 1.0) / (2.0 * mf + 2.0);
        m += 1;
        if 2 * m >= cut && (p < 1e-300 || p < total * 1e-17) {
            break;
        }
    }
    total
}

/// `S(r, φ)` on the truncated space.
pub fn squeeze_op(r: f64, phi: f64, dim: usize) -> Result<FockOperator> {
    if !(r >= 0.0) {
        return Err(Error::Config(format!("squeeze magnitude must be >= 0, got {r}")));
    }
    let tail = squeezed_vacuum_tail(r, dim);
    if tail >= SQUEEZE_TAIL_BUDGET {
        let mut min_dim = dim;
        while squeezed_vacuum_tail(r, min_dim) >= SQUEEZE_TAIL_BUDGET {
            min_dim += 1;
        }
        return Err(Error::TruncationTooSmall {
            dim,
            tail,
            budget: SQUEEZE_TAIL_BUDGET,
            min_dim,
        });
    }
    let a = annihilation(dim)?;
    let a2 = a.pow(2);
    let ad2 = fock::dagger(&a2);
    let zeta = C64::from_polar(r, phi);
    // (ζ*â² − ζâ†²)/2 = i·H, H = −i(ζ*â² − ζâ†²)/2.
    let gen = a2
        .scaled(zeta.conj())
        .add(&ad2.scaled(-zeta))?
        .scaled(C64::new(0.0, -0.5));
    fock::expm_hermitian(&gen, 1.0)
}

/// `R(ϑ) = exp(−iϑ n̂)`.
pub fn rotation_op(angle: f64, dim: usize) -> Result<FockOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "operators need dim >= 1",
        });
    }
    let diag = nalgebra::DVector::from_iterator(
        dim,
        (0..dim).map(|n| C64::from_polar(1.0, -angle * n as f64)),
    );
    FockOperator::from_matrix(nalgebra::DMatrix::from_diagonal(&diag))
}

/// `G = D·S·R` as a dense operator.
pub fn gaussian_unitary(params: &GaussianParams, dim: usize) -> Result<FockOperator> {
    let d = displacement_op(params.disp, dim)?;
    let s = squeeze_op(params.squeeze_r, params.squeeze_phi, dim)?;
    let r = rotation_op(params.rot, dim)?;
    d.compose(&s)?.compose(&r)
}

/// `D(disp)·S(r, φ)·R(rot)|ψ⟩` at the state's own dimension.
pub fn apply_gaussian(params: &GaussianParams, state: &StateVector) -> Result<StateVector> {
    let g = gaussian_unitary(params, state.dim())?;
    fock::apply(&g, state)
}

/// Inverse element: `G⁻¹ = R(−rot)·S(r, φ+π)·D(−disp)`.
pub fn apply_gaussian_inverse(params: &GaussianParams, state: &StateVector) -> Result<StateVector> {
    let dim = state.dim();
    let v = fock::apply(&displacement_op(-params.disp, dim)?, state)?;
    let v = fock::apply(&squeeze_op(params.squeeze_r, params.squeeze_phi + PI, dim)?, &v)?;
    fock::apply(&rotation_op(-params.rot, dim)?, &v)
}

/// `G† ρ G` with `G` built at `ρ`'s dimension.
pub fn unwind(rho: &DensityMatrix, params: &GaussianParams) -> Result<DensityMatrix> {
    let g = gaussian_unitary(params, rho.dim())?;
    rho.conjugated(&fock::dagger(&g))
}

/// `G† ρ G` evaluated in a zero-padded workspace of dimension `work_dim`.
///
/// Use this when the unwound state spreads beyond `ρ`'s truncation; the
/// result keeps the workspace dimension.
pub fn unwind_in(
    rho: &DensityMatrix,
    params: &GaussianParams,
    work_dim: usize,
) -> Result<DensityMatrix> {
    if work_dim < rho.dim() {
        return Err(Error::InvalidDimension {
            dim: work_dim,
            reason: "workspace must be at least the state dimension",
        });
    }
    unwind(&rho.resized(work_dim)?, params)
}

/// Grid definition for the orbit searches. Displacement bounds apply to both
/// the real and imaginary part; angles cover `(−π, π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub disp_min: f64,
    pub disp_max: f64,
    pub disp_step: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub r_step: f64,
    pub angle_step: f64,
    /// Number of halving passes around the incumbent.
    pub refinements: usize,
    /// Local grid half-width, in (halved) steps, for each refinement pass.
    pub refine_span: usize,
    /// Whether the orbit includes the rotation `R(rot)`.
    pub include_rotation: bool,
    /// Workspace dimension; `None` uses `max(2·dim, 256)`.
    pub work_dim: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            disp_min: -3.0,
            disp_max: 3.0,
            disp_step: 0.25,
            r_min: 0.0,
            r_max: 1.0,
            r_step: 0.1,
            angle_step: PI / 8.0,
            refinements: 8,
            refine_span: 2,
            include_rotation: true,
            work_dim: None,
        }
    }
}

impl SearchConfig {
    /// Cheaper grid for tests and previews.
    pub fn coarse() -> Self {
        Self {
            disp_step: 0.5,
            r_step: 0.2,
            angle_step: PI / 4.0,
            refinements: 6,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.disp_min,
            self.disp_max,
            self.disp_step,
            self.r_min,
            self.r_max,
            self.r_step,
            self.angle_step,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("grid bounds and steps must be finite".into()));
        }
        if !(self.disp_step > 0.0 && self.r_step > 0.0 && self.angle_step > 0.0) {
            return Err(Error::Config("grid steps must be > 0".into()));
        }
        if self.disp_min > self.disp_max {
            return Err(Error::Config("empty displacement grid".into()));
        }
        if self.r_min < 0.0 || self.r_min > self.r_max {
            return Err(Error::Config("empty squeeze grid".into()));
        }
        if self.angle_step > 2.0 * PI {
            return Err(Error::Config("angle step exceeds a full turn".into()));
        }
        Ok(())
    }

    fn work_dim_for(&self, dim: usize) -> usize {
        self.work_dim.unwrap_or_else(|| states::cubic_work_dim(dim)).max(dim)
    }
}

fn linear_axis(min: f64, max: f64, step: f64) -> Vec<f64> {
    let n = ((max - min) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| min + step * i as f64).collect()
}

fn angle_axis(step: f64) -> Vec<f64> {
    let n = ((2.0 * PI) / step + 1e-9).floor().max(1.0) as usize;
    (1..=n).map(|i| -PI + step * i as f64).collect()
}

fn local_axis(center: f64, step: f64, span: usize) -> Vec<f64> {
    let s = span as i64;
    (-s..=s).map(|j| center + step * j as f64).collect()
}

/// Outcome of an orbit search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitFit {
    pub fidelity: f64,
    pub params: GaussianParams,
    /// Incumbent after the coarse grid and after each refinement pass.
    pub history: Vec<f64>,
    pub evaluations: usize,
}

/// Components dropped from mixed targets on the coarse grid only.
const COARSE_DISCARD: f64 = 1e-2;
/// Components dropped during refinement; bounds the fidelity error.
const FINE_DISCARD: f64 = 1e-9;

/// Precomputed spectra for fast Gaussian action on a fixed workspace.
#[derive(Clone, Debug)]
pub struct OrbitEngine {
    work_dim: usize,
    quad: HermitianSpectrum,
    squeeze: HermitianSpectrum,
}

/// Split real/imaginary storage of a vector for the dot-product kernel.
struct Packed {
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Packed {
    fn from_state(v: &StateVector) -> Self {
        Self {
            re: v.amps().iter().map(|c| c.re).collect(),
            im: v.amps().iter().map(|c| c.im).collect(),
        }
    }

    /// `|⟨self|other⟩|²`.
    fn overlap_sqr(&self, other: &Packed) -> f64 {
        let mut acc_re = [0.0f64; 4];
        let mut acc_im = [0.0f64; 4];
        let chunks = self.re.len() / 4;
        for c in 0..chunks {
            for l in 0..4 {
                let i = 4 * c + l;
                let (ar, ai, br, bi) = (self.re[i], self.im[i], other.re[i], other.im[i]);
                acc_re[l] += ar * br + ai * bi;
                acc_im[l] += ar * bi - ai * br;
            }
        }
        let mut re = acc_re.iter().sum::<f64>();
        let mut im = acc_im.iter().sum::<f64>();
        for i in 4 * chunks..self.re.len() {
            let (ar, ai, br, bi) = (self.re[i], self.im[i], other.re[i], other.im[i]);
            re += ar * br + ai * bi;
            im += ar * bi - ai * br;
        }
        re * re + im * im
    }
}

struct Target {
    weights: Vec<f64>,
    vectors: Vec<StateVector>,
}

impl OrbitEngine {
    pub fn new(work_dim: usize) -> Result<Self> {
        let quad = HermitianSpectrum::new(&fock::quadrature(0.0, work_dim)?)?;
        let a2 = annihilation(work_dim)?.pow(2);
        // K = i(â² − â†²)/2, so S(r, 0) = exp(−i r K).
        let k = a2
            .add(&fock::dagger(&a2).scaled(C64::new(-1.0, 0.0)))?
            .scaled(C64::new(0.0, 0.5));
        let squeeze = HermitianSpectrum::new(&k)?;
        Ok(Self {
            work_dim,
            quad,
            squeeze,
        })
    }

    pub fn work_dim(&self) -> usize {
        self.work_dim
    }

    fn check(&self, v: &StateVector) -> Result<()> {
        if v.dim() != self.work_dim {
            return Err(Error::DimensionMismatch {
                expected: self.work_dim,
                found: v.dim(),
            });
        }
        Ok(())
    }

    pub fn displace(&self, alpha: C64, v: &StateVector) -> Result<StateVector> {
        self.check(v)?;
        let s = alpha.norm();
        if s == 0.0 {
            return Ok(v.clone());
        }
        let psi = alpha.arg() + PI / 2.0;
        let inner = self.quad.apply_exp_i(-s, &v.rotated(psi))?;
        Ok(inner.rotated(-psi))
    }

    pub fn squeeze(&self, r: f64, phi: f64, v: &StateVector) -> Result<StateVector> {
        self.check(v)?;
        if r == 0.0 {
            return Ok(v.clone());
        }
        let inner = self.squeeze.apply_exp_i(-r, &v.rotated(phi / 2.0))?;
        Ok(inner.rotated(-phi / 2.0))
    }

    /// `D·S·R|v⟩` in the workspace.
    pub fn apply(&self, params: &GaussianParams, v: &StateVector) -> Result<StateVector> {
        let v = v.rotated(params.rot);
        let v = self.squeeze(params.squeeze_r, params.squeeze_phi, &v)?;
        self.displace(params.disp, &v)
    }

    fn target_from_rho(&self, rho: &DensityMatrix, discard: f64) -> Result<Target> {
        let comps = rho.pure_components(discard);
        let mut weights = Vec::with_capacity(comps.len());
        let mut vectors = Vec::with_capacity(comps.len());
        for (w, v) in comps {
            weights.push(w);
            vectors.push(v.resized(self.work_dim)?);
        }
        Ok(Target { weights, vectors })
    }

    /// Maximizes `⟨ψ_g|ρ|ψ_g⟩` with `ψ_g = G(g)|reference⟩` over the grid.
    ///
    /// `reference` lives in the workspace; `rho` is zero-padded into it.
    pub fn search(
        &self,
        rho: &DensityMatrix,
        reference: &StateVector,
        cfg: &SearchConfig,
    ) -> Result<OrbitFit> {
        cfg.validate()?;
        self.check(reference)?;
        if rho.dim() > self.work_dim {
            return Err(Error::DimensionMismatch {
                expected: self.work_dim,
                found: rho.dim(),
            });
        }
        let coarse_target = self.target_from_rho(rho, COARSE_DISCARD)?;
        let fine_target = self.target_from_rho(rho, FINE_DISCARD)?;

        let rot_axis = |axis: Vec<f64>| if cfg.include_rotation { axis } else { vec![0.0] };
        let disp_axis = linear_axis(cfg.disp_min, cfg.disp_max, cfg.disp_step);
        let axes = [
            disp_axis.clone(),
            disp_axis,
            linear_axis(cfg.r_min, cfg.r_max, cfg.r_step),
            angle_axis(cfg.angle_step),
            rot_axis(angle_axis(cfg.angle_step)),
        ];
        let mut evaluations = 0usize;
        let (_, coarse_best) = self.best_on_grid(&coarse_target, reference, &axes, &mut evaluations)?;

        let mut incumbent = coarse_best;
        let mut best_f = self.fidelity_at(&fine_target, reference, &incumbent)?;
        evaluations += 1;
        let mut history = vec![best_f];

        let (mut hd, mut hr, mut ha) = (cfg.disp_step, cfg.r_step, cfg.angle_step);
        for _ in 0..cfg.refinements {
            hd /= 2.0;
            hr /= 2.0;
            ha /= 2.0;
            let span = cfg.refine_span;
            let r_axis: Vec<f64> = local_axis(incumbent.squeeze_r, hr, span)
                .into_iter()
                .filter(|r| *r >= 0.0)
                .collect();
            let axes = [
                local_axis(incumbent.disp.re, hd, span),
                local_axis(incumbent.disp.im, hd, span),
                r_axis,
                local_axis(incumbent.squeeze_phi, ha, span),
                rot_axis(local_axis(incumbent.rot, ha, span)),
            ];
            let (f, g) = self.best_on_grid(&fine_target, reference, &axes, &mut evaluations)?;
            if f > best_f {
                best_f = f;
                incumbent = g;
            }
            history.push(best_f);
        }
        Ok(OrbitFit {
            fidelity: best_f,
            params: incumbent,
            history,
            evaluations,
        })
    }

    fn fidelity_at(
        &self,
        target: &Target,
        reference: &StateVector,
        params: &GaussianParams,
    ) -> Result<f64> {
        let psi = self.apply(params, reference)?;
        let mut f = 0.0;
        for (w, v) in target.weights.iter().zip(&target.vectors) {
            f += w * fock::inner(v, &psi)?.norm_sqr();
        }
        Ok(f)
    }

    /// Exhaustive evaluation of the Cartesian grid `axes` (disp re, disp im,
    /// r, φ, rot). Ties go to the lexicographically smallest tuple.
    fn best_on_grid(
        &self,
        target: &Target,
        reference: &StateVector,
        axes: &[Vec<f64>; 5],
        evaluations: &mut usize,
    ) -> Result<(f64, GaussianParams)> {
        let [dre, dim_, rs, phis, rots] = axes;
        if axes.iter().any(|a| a.is_empty()) {
            return Err(Error::Config("empty grid".into()));
        }
        // Squeezed, rotated references, indexed (r, φ, rot).
        let mut ws: Vec<Packed> = Vec::with_capacity(rs.len() * phis.len() * rots.len());
        for &r in rs {
            for &phi in phis {
                for &rot in rots {
                    let v = self.squeeze(r, phi, &reference.rotated(rot))?;
                    ws.push(Packed::from_state(&v));
                }
            }
        }
        // Pulled-back targets D(−α)|e_i⟩, indexed (re, im).
        let mut best = (f64::NEG_INFINITY, [0.0f64; 5]);
        let mut scores = vec![0.0f64; ws.len()];
        for &re in dre {
            for &im in dim_ {
                let alpha = C64::new(re, im);
                let us: Vec<Packed> = target
                    .vectors
                    .iter()
                    .map(|v| self.displace(-alpha, v).map(|u| Packed::from_state(&u)))
                    .collect::<Result<_>>()?;
                scores.iter_mut().for_each(|s| *s = 0.0);
                for (u, w) in us.iter().zip(&target.weights) {
                    for (s, wv) in scores.iter_mut().zip(&ws) {
                        *s += w * u.overlap_sqr(wv);
                    }
                }
                let mut idx = 0;
                for &r in rs {
                    for &phi in phis {
                        for &rot in rots {
                            let f = scores[idx];
                            idx += 1;
                            if f > best.0 {
                                best = (f, [re, im, r, phi, rot]);
                            }
                        }
                    }
                }
                *evaluations += ws.len();
            }
        }
        let [re, im, r, phi, rot] = best.1;
        let params = GaussianParams::new(C64::new(re, im), r, phi, rot)?;
        Ok((best.0, params))
    }
}

/// Engine sized for states of dimension `dim` under `cfg`.
pub fn engine_for(dim: usize, cfg: &SearchConfig) -> Result<OrbitEngine> {
    OrbitEngine::new(cfg.work_dim_for(dim))
}

/// Best fidelity of `ρ` with the Gaussian orbit of the cubic state
/// `exp(iγx̂_θ³)|0⟩`.
pub fn orbit_fidelity(
    rho: &DensityMatrix,
    gamma: f64,
    theta: f64,
    cfg: &SearchConfig,
) -> Result<OrbitFit> {
    let engine = engine_for(rho.dim(), cfg)?;
    orbit_fidelity_with(&engine, rho, gamma, theta, cfg)
}

/// [`orbit_fidelity`] reusing a prebuilt engine.
pub fn orbit_fidelity_with(
    engine: &OrbitEngine,
    rho: &DensityMatrix,
    gamma: f64,
    theta: f64,
    cfg: &SearchConfig,
) -> Result<OrbitFit> {
    // The reference must be representable at ρ's truncation.
    states::cubic_phase_state_with(
        gamma,
        theta,
        rho.dim(),
        states::CubicOptions {
            work_dim: Some(engine.work_dim()),
            ..Default::default()
        },
    )?;
    let reference = states::cubic_phase_workspace(gamma, theta, engine.work_dim())?;
    engine.search(rho, &reference, cfg)
}

/// Largest `|⟨ψ_G|ψ_cubic⟩|²` over pure Gaussian states `D(α)S(r, φ)|0⟩`.
pub fn best_gaussian_fidelity(
    gamma: f64,
    theta: f64,
    dim: usize,
    cfg: &SearchConfig,
) -> Result<OrbitFit> {
    let engine = engine_for(dim, cfg)?;
    best_gaussian_fidelity_with(&engine, gamma, theta, dim, cfg)
}

pub fn best_gaussian_fidelity_with(
    engine: &OrbitEngine,
    gamma: f64,
    theta: f64,
    dim: usize,
    cfg: &SearchConfig,
) -> Result<OrbitFit> {
    let cubic = states::cubic_phase_state_with(
        gamma,
        theta,
        dim,
        states::CubicOptions {
            work_dim: Some(engine.work_dim()),
            ..Default::default()
        },
    )?;
    // Rotation acts trivially on the vacuum up to phase.
    let cfg = SearchConfig {
        include_rotation: false,
        ..cfg.clone()
    };
    let target = DensityMatrix::outer_unnormalized(&cubic.state);
    let vacuum = states::vacuum(engine.work_dim())?;
    engine.search(&target, &vacuum, &cfg)
}
