//! Heterodyne and homodyne sampling, and the postselection rule that turns
//! heterodyne outcomes into photon addition.
//!
//! Quadrature outcomes are in ħ=2 units. A heterodyne outcome `(x, p)` maps
//! to the coherent amplitude `β = (x + ip)/2`.
//!
//! Every sample owns its random stream: the sampler for sample `i` is a
//! ChaCha stream `i` under the batch seed, and the acceptance draw of a
//! sample is keyed by its own coordinates. Splitting a run into index ranges
//! or reordering a batch therefore never changes a result.

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Mixture, StateVector, C64};
use crate::states;

/// Radius² of the region where acceptance follows `(x²+p²)/6)^k`.
pub const ACCEPTANCE_RADIUS_SQR: f64 = 6.0;
/// Safety factor applied to the scanned envelope constant.
pub const ENVELOPE_MARGIN: f64 = 1.2;
/// Proposal draws allowed per sample before giving up.
pub const MAX_TRIES: usize = 100_000;

/// One heterodyne outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneSample {
    pub x: f64,
    pub p: f64,
    pub accepted: bool,
}

impl HeterodyneSample {
    pub fn beta(&self) -> C64 {
        C64::new(self.x / 2.0, self.p / 2.0)
    }
}

/// A batch of outcomes plus what produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub samples: Vec<HeterodyneSample>,
    pub seed: u64,
    /// Free-form description of the sampled state.
    pub source: String,
    /// Photons added by postselection; 0 if the batch was not postselected.
    pub k: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn accepted(&self) -> impl Iterator<Item = &HeterodyneSample> {
        self.samples.iter().filter(|s| s.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }

    pub fn accepted_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.accepted_count() as f64 / self.samples.len() as f64
        }
    }

    /// Copy containing only accepted samples.
    pub fn accepted_only(&self) -> SampleBatch {
        SampleBatch {
            samples: self.accepted().copied().collect(),
            ..self.clone()
        }
    }

    /// Marks every sample accepted.
    pub fn accept_all(mut self) -> SampleBatch {
        self.samples.iter_mut().for_each(|s| s.accepted = true);
        self
    }
}

/// `⟨β|ψ⟩` without the coherent-state truncation check.
pub fn coherent_overlap(beta: C64, psi: &StateVector) -> C64 {
    let bc = beta.conj();
    let mut term = C64::new(1.0, 0.0);
    let mut acc = C64::new(0.0, 0.0);
    for (n, a) in psi.amps().iter().enumerate() {
        if n > 0 {
            term = term * bc / (n as f64).sqrt();
        }
        acc += term * a;
    }
    acc * (-beta.norm_sqr() / 2.0).exp()
}

/// Q-function evaluator with the state's eigendecomposition precomputed.
#[derive(Clone, Debug)]
pub struct QEvaluator {
    comps: Vec<(f64, StateVector)>,
    dim: usize,
}

impl QEvaluator {
    pub fn new<S: Mixture + ?Sized>(state: &S) -> Self {
        Self {
            comps: state.components(),
            dim: state.dim(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `⟨β|ρ|β⟩/π`.
    pub fn q(&self, beta: C64) -> f64 {
        self.comps
            .iter()
            .map(|(w, v)| w * coherent_overlap(beta, v).norm_sqr())
            .sum::<f64>()
            / PI
    }

    /// Outcome density per unit `dx dp`, i.e. `Q(β)/4`.
    pub fn density_xp(&self, x: f64, p: f64) -> f64 {
        self.q(C64::new(x / 2.0, p / 2.0)) / 4.0
    }

    /// `(⟨â⟩, ⟨n̂⟩)`.
    pub fn moments(&self) -> (C64, f64) {
        let mut mean_a = C64::new(0.0, 0.0);
        let mut mean_n = 0.0;
        for (w, v) in &self.comps {
            let a = v.amps();
            for n in 1..a.len() {
                mean_a += *w * a[n - 1].conj() * a[n] * (n as f64).sqrt();
                mean_n += w * n as f64 * a[n].norm_sqr();
            }
        }
        (mean_a, mean_n)
    }
}

/// `⟨β|ρ|β⟩/π` for a pure or mixed state.
pub fn q_function<S: Mixture + ?Sized>(state: &S, beta: C64) -> Result<f64> {
    states::coherent(beta, state.dim())?;
    Ok(QEvaluator::new(state).q(beta))
}

/// Postselection weight: `((x²+p²)/6)^k` inside `x²+p² ≤ 6`, exactly 1 outside.
pub fn acceptance_probability(x: f64, p: f64, k: usize) -> f64 {
    let r2 = x * x + p * p;
    if r2 <= ACCEPTANCE_RADIUS_SQR {
        (r2 / ACCEPTANCE_RADIUS_SQR).powi(k as i32)
    } else {
        1.0
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn sample_key(x: f64, p: f64) -> u64 {
    splitmix64(x.to_bits() ^ splitmix64(p.to_bits()))
}

/// Sets `accepted` on each sample by a Bernoulli draw with
/// [`acceptance_probability`]. Draws are keyed by the sample coordinates, so
/// the result does not depend on batch order.
pub fn postselect(batch: &SampleBatch, k: usize, rng_seed: u64) -> SampleBatch {
    let samples = batch
        .samples
        .iter()
        .map(|s| {
            let acc = acceptance_probability(s.x, s.p, k);
            let u: f64 = stream_rng(rng_seed, sample_key(s.x, s.p)).random();
            HeterodyneSample {
                accepted: u < acc,
                ..*s
            }
        })
        .collect();
    SampleBatch {
        samples,
        seed: batch.seed,
        source: batch.source.clone(),
        k,
    }
}

/// Rejection sampler for the heterodyne outcome density of a state.
#[derive(Clone, Debug)]
pub struct HeterodyneSampler {
    q: QEvaluator,
    center: (f64, f64),
    sigma: f64,
    envelope: f64,
}

impl HeterodyneSampler {
    pub fn new<S: Mixture + ?Sized>(state: &S) -> Result<Self> {
        let q = QEvaluator::new(state);
        let (mean_a, mean_n) = q.moments();
        let center = (2.0 * mean_a.re, 2.0 * mean_a.im);
        let sigma = (2.0 * (1.0 + mean_n.max(0.0))).sqrt();
        let mut sampler = Self {
            q,
            center,
            sigma,
            envelope: 0.0,
        };
        let half = 6.0 * sigma;
        let steps = 160usize;
        let mut ratio_max: f64 = 0.0;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = center.0 - half + 2.0 * half * i as f64 / steps as f64;
                let p = center.1 - half + 2.0 * half * j as f64 / steps as f64;
                ratio_max = ratio_max.max(sampler.q.density_xp(x, p) / sampler.proposal(x, p));
            }
        }
        if !(ratio_max.is_finite() && ratio_max > 0.0) {
            return Err(Error::Sampling("could not bound the Q-function".into()));
        }
        sampler.envelope = ENVELOPE_MARGIN * ratio_max;
        Ok(sampler)
    }

    fn proposal(&self, x: f64, p: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        let d2 = (x - self.center.0).powi(2) + (p - self.center.1).powi(2);
        (-d2 / (2.0 * s2)).exp() / (2.0 * PI * s2)
    }

    /// Expected proposal draws per sample.
    pub fn envelope(&self) -> f64 {
        self.envelope
    }

    /// Draws sample `index` of the stream selected by `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> Result<HeterodyneSample> {
        let mut rng = stream_rng(seed, index);
        for _ in 0..MAX_TRIES {
            let gx: f64 = rng.sample(StandardNormal);
            let gp: f64 = rng.sample(StandardNormal);
            let u: f64 = rng.random();
            let x = self.center.0 + self.sigma * gx;
            let p = self.center.1 + self.sigma * gp;
            let target = self.q.density_xp(x, p);
            let bound = self.envelope * self.proposal(x, p);
            if target > bound {
                return Err(Error::Sampling(format!(
                    "envelope exceeded at ({x}, {p}); proposal does not cover the state"
                )));
            }
            if u * bound < target {
                return Ok(HeterodyneSample {
                    x,
                    p,
                    accepted: false,
                });
            }
        }
        Err(Error::Sampling(format!(
            "no sample accepted after {MAX_TRIES} proposals"
        )))
    }

    pub fn draw_range(&self, seed: u64, range: Range<u64>) -> Result<Vec<HeterodyneSample>> {
        range.map(|i| self.draw(seed, i)).collect()
    }
}

/// `n` heterodyne outcomes of `state`; `accepted` is left unset.
pub fn sample_heterodyne<S: Mixture + ?Sized>(
    state: &S,
    n: usize,
    rng_seed: u64,
    source: &str,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let sampler = HeterodyneSampler::new(state)?;
    Ok(SampleBatch {
        samples: sampler.draw_range(rng_seed, 0..n as u64)?,
        seed: rng_seed,
        source: source.to_string(),
        k: 0,
    })
}

/// Position eigenfunctions `⟨x|n⟩`, n < count, in ħ=2 units.
pub fn position_wavefunctions(count: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    // ⟨x|0⟩ = (2π)^{−1/4} e^{−x²/4}; ⟨x|n⟩ = (x⟨x|n−1⟩ − √(n−1)⟨x|n−2⟩)/√n.
    out.push((2.0 * PI).powf(-0.25) * (-x * x / 4.0).exp());
    for n in 1..count {
        let prev2 = if n >= 2 { out[n - 2] } else { 0.0 };
        let v = (x * out[n - 1] - ((n - 1) as f64).sqrt() * prev2) / (n as f64).sqrt();
        out.push(v);
    }
    out
}

/// Homodyne marginal `⟨x|ρ|x⟩` evaluator.
#[derive(Clone, Debug)]
pub struct MarginalEvaluator {
    comps: Vec<(f64, StateVector)>,
    dim: usize,
}

impl MarginalEvaluator {
    /// Marginal of `x̂_θ`.
    pub fn new<S: Mixture + ?Sized>(state: &S, theta: f64) -> Self {
        let comps = state
            .components()
            .into_iter()
            .map(|(w, v)| (w, v.rotated(theta)))
            .collect();
        Self {
            comps,
            dim: state.dim(),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = position_wavefunctions(self.dim, x);
        self.comps
            .iter()
            .map(|(w, v)| {
                let amp: C64 = v.amps().iter().zip(&h).map(|(a, hn)| a * hn).sum();
                w * amp.norm_sqr()
            })
            .sum()
    }

    fn moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut mean_n = 0.0;
        for (w, v) in &self.comps {
            let a = v.amps();
            for n in 1..a.len() {
                // ⟨x̂⟩ = 2 Re ⟨â⟩
                mean += 2.0 * w * (a[n - 1].conj() * a[n]).re * (n as f64).sqrt();
                mean_n += w * n as f64 * a[n].norm_sqr();
            }
        }
        (mean, mean_n)
    }
}

/// `n` outcomes of the quadrature `x̂_θ`.
pub fn sample_homodyne<S: Mixture + ?Sized>(
    state: &S,
    theta: f64,
    n: usize,
    rng_seed: u64,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    let marg = MarginalEvaluator::new(state, theta);
    let (center, mean_n) = marg.moments();
    let sigma = (2.0 * (1.0 + mean_n.max(0.0))).sqrt();
    let proposal = |x: f64| {
        (-(x - center).powi(2) / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
    };
    let steps = 2000usize;
    let half = 8.0 * sigma;
    let ratio_max = (0..=steps)
        .map(|i| center - half + 2.0 * half * i as f64 / steps as f64)
        .map(|x| marg.density(x) / proposal(x))
        .fold(0.0, f64::max);
    if !(ratio_max.is_finite() && ratio_max > 0.0) {
        return Err(Error::Sampling("could not bound the marginal".into()));
    }
    let envelope = ENVELOPE_MARGIN * ratio_max;
    (0..n as u64)
        .map(|i| {
            let mut rng = stream_rng(rng_seed, i);
            for _ in 0..MAX_TRIES {
                let g: f64 = rng.sample(StandardNormal);
                let u: f64 = rng.random();
                let x = center + sigma * g;
                let bound = envelope * proposal(x);
                let target = marg.density(x);
                if target > bound {
                    return Err(Error::Sampling(format!("envelope exceeded at {x}")));
                }
                if u * bound < target {
                    return Ok(x);
                }
            }
            Err(Error::Sampling(format!(
                "no sample accepted after {MAX_TRIES} proposals"
            )))
        })
        .collect()
}
