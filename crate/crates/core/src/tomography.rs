//! Maximum-likelihood reconstruction from heterodyne outcomes.
//!
//! Each accepted outcome contributes the projector `|β⟩⟨β|`. Outcomes are
//! first coalesced onto a square grid in `(x, p)` and each occupied cell is
//! represented by its center, weighted by its count. The iteration is the
//! usual `ρ ← N[R ρ R]` with `R = Σ_b w_b Π_b / p_b`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, C64};
use crate::measurement::{coherent_overlap, SampleBatch};

/// Floor applied to outcome probabilities inside the iteration.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Iteration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaxLikOptions {
    pub dim: usize,
    /// Stop once the relative log-likelihood gain of an iteration drops below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Cell width in `x` and `p` for coalescing outcomes.
    pub bin_width: f64,
}

impl Default for MaxLikOptions {
    fn default() -> Self {
        Self {
            dim: 40,
            tol: 1e-9,
            max_iters: 2000,
            bin_width: 0.1,
        }
    }
}

impl MaxLikOptions {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension {
                dim: self.dim,
                reason: "reconstruction needs dim >= 2",
            });
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Config("bin width must be > 0".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::Config("tolerance must be >= 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Reconstruction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxLikResult {
    pub rho: DensityMatrix,
    pub iterations: usize,
    /// Binned log-likelihood `Σ_b w_b log(p_b/π)` of the final iterate.
    pub loglikelihood: f64,
    pub converged: bool,
    /// Iterations that fell back to a diluted step.
    pub diluted_steps: usize,
    /// Binned log-likelihood after each iteration, starting with `I/dim`.
    pub history: Vec<f64>,
}

/// Occupied grid cells: centers as `β` and their counts.
#[derive(Clone, Debug, PartialEq)]
pub struct BinnedOutcomes {
    pub betas: Vec<C64>,
    pub weights: Vec<f64>,
}

impl BinnedOutcomes {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Coalesces accepted outcomes onto cells of width `bin_width` in `x` and `p`.
pub fn bin_outcomes(batch: &SampleBatch, bin_width: f64) -> BinnedOutcomes {
    let mut cells: BTreeMap<(i64, i64), u64> = BTreeMap::new();
    for s in batch.accepted() {
        let key = (
            (s.x / bin_width).floor() as i64,
            (s.p / bin_width).floor() as i64,
        );
        *cells.entry(key).or_insert(0) += 1;
    }
    let mut betas = Vec::with_capacity(cells.len());
    let mut weights = Vec::with_capacity(cells.len());
    for ((i, j), count) in cells {
        let x = (i as f64 + 0.5) * bin_width;
        let p = (j as f64 + 0.5) * bin_width;
        betas.push(C64::new(x / 2.0, p / 2.0));
        weights.push(count as f64);
    }
    BinnedOutcomes { betas, weights }
}

/// `Σ_j log(⟨β_j|ρ|β_j⟩/π)` over accepted samples; `−∞` if any outcome has
/// zero probability.
pub fn loglikelihood(rho: &DensityMatrix, batch: &SampleBatch) -> Result<f64> {
    let comps = rho.pure_components(0.0);
    let mut total = 0.0;
    let mut any = false;
    for s in batch.accepted() {
        any = true;
        let beta = s.beta();
        let q: f64 = comps
            .iter()
            .map(|(w, v)| w * coherent_overlap(beta, v).norm_sqr())
            .sum::<f64>()
            / std::f64::consts::PI;
        if q <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        total += q.ln();
    }
    if !any {
        return Err(Error::EmptyBatch);
    }
    Ok(total)
}

/// Rows `⟨β_b|n⟩`.
fn projector_rows(betas: &[C64], dim: usize) -> DMatrix<C64> {
    let mut c = DMatrix::zeros(betas.len(), dim);
    for (b, beta) in betas.iter().enumerate() {
        let bc = beta.conj();
        let mut term = C64::new((-beta.norm_sqr() / 2.0).exp(), 0.0);
        for n in 0..dim {
            if n > 0 {
                term = term * bc / (n as f64).sqrt();
            }
            c[(b, n)] = term;
        }
    }
    c
}

struct Problem {
    c: DMatrix<C64>,
    weights: DVector<f64>,
    total: f64,
}

impl Problem {
    /// `p_b = ⟨β_b|ρ|β_b⟩` (without the 1/π).
    fn probabilities(&self, rho: &DMatrix<C64>) -> DVector<f64> {
        let m = &self.c * rho;
        DVector::from_iterator(
            self.c.nrows(),
            (0..self.c.nrows()).map(|b| {
                let mut s = 0.0;
                for n in 0..self.c.ncols() {
                    s += (m[(b, n)] * self.c[(b, n)].conj()).re;
                }
                s
            }),
        )
    }

    fn loglik(&self, probs: &DVector<f64>) -> f64 {
        let ln_pi = std::f64::consts::PI.ln();
        probs
            .iter()
            .zip(self.weights.iter())
            .map(|(p, w)| w * (p.max(PROBABILITY_FLOOR).ln() - ln_pi))
            .sum()
    }

    /// `R/N = C† diag(w/(N p)) C`.
    fn r_operator(&self, probs: &DVector<f64>) -> DMatrix<C64> {
        let mut scaled = self.c.clone();
        for b in 0..scaled.nrows() {
            let f = self.weights[b] / (self.total * probs[b].max(PROBABILITY_FLOOR));
            scaled.row_mut(b).scale_mut(f);
        }
        self.c.adjoint() * scaled
    }
}

fn normalized_sandwich(left: &DMatrix<C64>, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let m = left * rho * left.adjoint();
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let tr = m.trace().re;
    m / C64::new(tr, 0.0)
}

/// Iterative maximum-likelihood estimate from the accepted samples of `batch`.
pub fn maxlik_reconstruct(batch: &SampleBatch, opts: &MaxLikOptions) -> Result<MaxLikResult> {
    opts.validate()?;
    let binned = bin_outcomes(batch, opts.bin_width);
    if binned.betas.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = opts.dim;
    let problem = Problem {
        c: projector_rows(&binned.betas, dim),
        weights: DVector::from_vec(binned.weights.clone()),
        total: binned.total(),
    };
    let identity = DMatrix::<C64>::identity(dim, dim);
    let mut rho = identity.clone() / C64::new(dim as f64, 0.0);
    let mut probs = problem.probabilities(&rho);
    let mut ll = problem.loglik(&probs);
    let mut history = vec![ll];
    let mut converged = false;
    let mut diluted_steps = 0;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let r = problem.r_operator(&probs);
        let mut next = normalized_sandwich(&r, &rho);
        let mut next_probs = problem.probabilities(&next);
        let mut next_ll = problem.loglik(&next_probs);
        let slack = 1e-12 * ll.abs();
        if next_ll < ll - slack {
            // The plain step overshot; shrink toward the identity map.
            diluted_steps += 1;
            let mut eps = 0.5;
            loop {
                let step = &identity + &r * C64::new(eps, 0.0);
                next = normalized_sandwich(&step, &rho);
                next_probs = problem.probabilities(&next);
                next_ll = problem.loglik(&next_probs);
                if next_ll >= ll - slack || eps < 1e-8 {
                    break;
                }
                eps /= 2.0;
            }
            if next_ll < ll - slack {
                return Err(Error::Numerical(
                    "likelihood decreased for every step size".into(),
                ));
            }
        }
        let gain = (next_ll - ll) / ll.abs().max(f64::MIN_POSITIVE);
        rho = next;
        probs = next_probs;
        ll = next_ll;
        history.push(ll);
        if gain.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    let rho = finalize(rho)?;
    Ok(MaxLikResult {
        rho,
        iterations,
        loglikelihood: ll,
        converged,
        diluted_steps,
        history,
    })
}

/// Hermitizes, clears eigenvalues below 1e−12 in magnitude, renormalizes.
fn finalize(rho: DMatrix<C64>) -> Result<DensityMatrix> {
    let sym = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    let needs_projection = eig.eigenvalues.iter().any(|&l| l < 0.0 && l > -1e-12);
    let mat = if needs_projection {
        let vals = eig.eigenvalues.map(|l| if l < 0.0 && l > -1e-12 { 0.0 } else { l });
        let v = &eig.eigenvectors;
        let d = DMatrix::from_diagonal(&vals.map(|l| C64::new(l, 0.0)));
        v * d * v.adjoint()
    } else {
        sym
    };
    let tr = mat.trace().re;
    if !(tr.is_finite() && tr > 0.0) {
        return Err(Error::Numerical(format!("reconstruction trace {tr}")));
    }
    DensityMatrix::from_matrix(mat / C64::new(tr, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{inner, Mixture, StateVector};
    use crate::measurement::{sample_heterodyne, HeterodyneSample};
    use crate::states;

    fn fidelity(rho: &DensityMatrix, psi: &StateVector) -> f64 {
        rho.components()
            .iter()
            .map(|(w, v)| w * inner(psi, v).unwrap().norm_sqr())
            .sum()
    }

    fn batch_of(psi: &StateVector, n: usize, seed: u64) -> SampleBatch {
        sample_heterodyne(psi, n, seed, "test").unwrap().accept_all()
    }

    #[test]
    fn loglikelihood_basics() {
        let vac = DensityMatrix::from_pure(&states::vacuum(6).unwrap()).unwrap();
        let one = SampleBatch {
            samples: vec![HeterodyneSample {
                x: 0.0,
                p: 0.0,
                accepted: true,
            }],
            seed: 0,
            source: String::new(),
            k: 0,
        };
        let ll = loglikelihood(&vac, &one).unwrap();
        assert!((ll - (1.0 / std::f64::consts::PI).ln()).abs() < 1e-14);
        let f1 = DensityMatrix::from_pure(&states::fock(1, 6).unwrap()).unwrap();
        assert_eq!(loglikelihood(&f1, &one).unwrap(), f64::NEG_INFINITY);

        let batch = batch_of(&states::vacuum(6).unwrap(), 2000, 4);
        assert!(loglikelihood(&vac, &batch).unwrap() >= loglikelihood(&f1, &batch).unwrap());
        let none = SampleBatch {
            samples: vec![],
            ..one
        };
        assert_eq!(loglikelihood(&vac, &none), Err(Error::EmptyBatch));
    }

    #[test]
    fn binning_preserves_counts() {
        let batch = batch_of(&states::coherent(C64::new(0.5, 0.2), 30).unwrap(), 5000, 2);
        let binned = bin_outcomes(&batch, 0.1);
        assert_eq!(binned.total(), 5000.0);
        let half = SampleBatch {
            samples: batch.samples.iter().enumerate()
                .map(|(i, s)| HeterodyneSample { accepted: i % 2 == 0, ..*s })
                .collect(),
            ..batch.clone()
        };
        assert_eq!(bin_outcomes(&half, 0.1).total(), 2500.0);
    }

    #[test]
    fn empty_batch_rejected() {
        let batch = sample_heterodyne(&states::vacuum(4).unwrap(), 10, 1, "v").unwrap();
        assert_eq!(
            maxlik_reconstruct(&batch, &MaxLikOptions::default()),
            Err(Error::EmptyBatch)
        );
    }

    #[test]
    fn vacuum_round_trip() {
        let batch = batch_of(&states::vacuum(10).unwrap(), 100_000, 10);
        let opts = MaxLikOptions {
            dim: 10,
            ..Default::default()
        };
        let res = maxlik_reconstruct(&batch, &opts).unwrap();
        assert!(res.rho.get(0, 0).re >= 0.99, "{}", res.rho.get(0, 0).re);
        assert!(res
            .history
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-10 * w[0].abs()));
    }

    #[test]
    fn coherent_round_trip_and_invariants() {
        let psi = states::coherent(C64::new(0.5, 0.0), 20).unwrap();
        let batch = batch_of(&psi, 100_000, 11);
        let opts = MaxLikOptions {
            dim: 20,
            ..Default::default()
        };
        let res = maxlik_reconstruct(&batch, &opts).unwrap();
        let f = fidelity(&res.rho, &psi);
        assert!(f >= 0.99, "{f}");
        assert!((res.rho.trace() - 1.0).abs() < 1e-9);
        assert!(res.rho.eigenvalues().iter().all(|&l| l >= -1e-9));
        // No randomness inside the solver.
        assert_eq!(res, maxlik_reconstruct(&batch, &opts).unwrap());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let batch = batch_of(&states::fock(1, 8).unwrap(), 2000, 3);
        let opts = MaxLikOptions {
            dim: 8,
            max_iters: 3,
            tol: 0.0,
            ..Default::default()
        };
        let res = maxlik_reconstruct(&batch, &opts).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 3);
        assert_eq!(res.history.len(), 4);
    }
}
