//! Truncated Fock-space primitives.
//!
//! Everything here lives on the span of `|0⟩..|D−1⟩` for a caller-chosen
//! truncation `D`. Quadratures follow the `ħ = 2` convention, `x̂ = â + â†`,
//! so the vacuum has unit quadrature variance. Operators are dense; the
//! supported dimensions never exceed a few hundred.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Tolerance used when checking that a generator is Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Norm below which a vector cannot be normalized.
pub const DEGENERATE_NORM: f64 = 1e-14;

const DM_HERMITIAN_TOL: f64 = 1e-10;
const DM_TRACE_TOL: f64 = 1e-9;
const DM_EIGEN_FLOOR: f64 = -1e-9;

fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

fn check_ladder_dim(dim: usize) -> Result<()> {
    if dim < 2 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "ladder operators need dim >= 2",
        });
    }
    Ok(())
}

/// Pure state over the truncated Fock basis; `amps[n]` is the amplitude of `|n⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amps: DVector<C64>,
}

impl StateVector {
    pub fn from_amps(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidDimension {
                dim: 0,
                reason: "state vectors need dim >= 1",
            });
        }
        Ok(Self {
            amps: DVector::from_vec(amps),
        })
    }

    pub(crate) fn from_dvector(amps: DVector<C64>) -> Self {
        debug_assert!(!amps.is_empty());
        Self { amps }
    }

    /// Basis vector `|n⟩`.
    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "state vectors need dim >= 1",
            });
        }
        if n >= dim {
            return Err(Error::OutOfRange { index: n, dim });
        }
        let mut amps = DVector::zeros(dim);
        amps[n] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        self.amps.as_slice()
    }

    pub fn as_dvector(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Photon-number probabilities `|amps_n|²`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Zero-pads or truncates to `dim` without renormalizing.
    pub fn resized(&self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "state vectors need dim >= 1",
            });
        }
        let mut amps = DVector::zeros(dim);
        let n = dim.min(self.dim());
        amps.rows_mut(0, n).copy_from(&self.amps.rows(0, n));
        Ok(Self { amps })
    }

    /// Squared norm carried by indices `>= cut`.
    pub fn tail_mass_from(&self, cut: usize) -> f64 {
        self.amps.iter().skip(cut).map(|a| a.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        Self {
            amps: self.amps.map(|a| a.conj()),
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            amps: &self.amps * factor,
        }
    }

    /// Applies the phase `e^{−i·angle·n}` to each component, i.e. the
    /// rotation `exp(−i·angle·n̂)`.
    pub fn rotated(&self, angle: f64) -> Self {
        let amps = DVector::from_iterator(
            self.dim(),
            self.amps
                .iter()
                .enumerate()
                .map(|(n, a)| a * C64::from_polar(1.0, -angle * n as f64)),
        );
        Self { amps }
    }
}

/// `⟨a|b⟩`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    check_same_dim(a.dim(), b.dim())?;
    Ok(a.amps.dotc(&b.amps))
}

pub fn normalize(state: &StateVector) -> Result<StateVector> {
    let norm = state.norm();
    if !(norm >= DEGENERATE_NORM) {
        return Err(Error::DegenerateState { norm });
    }
    Ok(StateVector {
        amps: &state.amps / C64::new(norm, 0.0),
    })
}

/// Dense operator on the truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    mat: DMatrix<C64>,
}

impl FockOperator {
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch {
                expected: mat.nrows(),
                found: mat.ncols(),
            });
        }
        if mat.nrows() == 0 {
            return Err(Error::InvalidDimension {
                dim: 0,
                reason: "operators need dim >= 1",
            });
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    /// `self · other`.
    pub fn compose(&self, other: &FockOperator) -> Result<FockOperator> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(FockOperator {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn pow(&self, k: u32) -> FockOperator {
        let mut out = DMatrix::identity(self.dim(), self.dim());
        for _ in 0..k {
            out = &out * &self.mat;
        }
        FockOperator { mat: out }
    }

    pub fn scaled(&self, factor: C64) -> FockOperator {
        FockOperator {
            mat: &self.mat * factor,
        }
    }

    pub fn add(&self, other: &FockOperator) -> Result<FockOperator> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(FockOperator {
            mat: &self.mat + &other.mat,
        })
    }

    /// Top-left `dim × dim` block.
    pub fn truncated(&self, dim: usize) -> Result<FockOperator> {
        if dim == 0 || dim > self.dim() {
            return Err(Error::InvalidDimension {
                dim,
                reason: "truncation must lie within the operator dimension",
            });
        }
        Ok(FockOperator {
            mat: self.mat.view((0, 0), (dim, dim)).into_owned(),
        })
    }

    /// `max |A − A†|` over entries.
    pub fn hermitian_deviation(&self) -> f64 {
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `max |U†U − I|` over entries.
    pub fn unitary_deviation(&self) -> f64 {
        let prod = self.mat.adjoint() * &self.mat;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &FockOperator) -> Result<f64> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(self
            .mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// `â` with `⟨n−1|â|n⟩ = √n`.
pub fn annihilation(dim: usize) -> Result<FockOperator> {
    check_ladder_dim(dim)?;
    let mut mat = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        mat[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    Ok(FockOperator { mat })
}

pub fn creation(dim: usize) -> Result<FockOperator> {
    Ok(dagger(&annihilation(dim)?))
}

/// `n̂ = â†â`, diagonal `0, 1, .., D−1`.
pub fn number(dim: usize) -> Result<FockOperator> {
    if dim == 0 {
        return Err(Error::InvalidDimension {
            dim,
            reason: "operators need dim >= 1",
        });
    }
    let diag = DVector::from_iterator(dim, (0..dim).map(|n| C64::new(n as f64, 0.0)));
    Ok(FockOperator {
        mat: DMatrix::from_diagonal(&diag),
    })
}

/// `x̂_θ = â e^{−iθ} + â† e^{iθ}`; `θ = 0` is `x̂`, `θ = π/2` is `p̂`.
pub fn quadrature(theta: f64, dim: usize) -> Result<FockOperator> {
    check_ladder_dim(dim)?;
    let mut mat = DMatrix::zeros(dim, dim);
    let down = C64::from_polar(1.0, -theta);
    let up = C64::from_polar(1.0, theta);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        mat[(n - 1, n)] = down * s;
        mat[(n, n - 1)] = up * s;
    }
    Ok(FockOperator { mat })
}

pub fn dagger(op: &FockOperator) -> FockOperator {
    FockOperator {
        mat: op.mat.adjoint(),
    }
}

pub fn apply(op: &FockOperator, state: &StateVector) -> Result<StateVector> {
    check_same_dim(op.dim(), state.dim())?;
    Ok(StateVector {
        amps: &op.mat * &state.amps,
    })
}

/// Eigendecomposition of a Hermitian generator, reusable for `exp(i·s·A)`
/// at many values of `s`.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    values: DVector<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianSpectrum {
    pub fn new(gen: &FockOperator) -> Result<Self> {
        let dev = gen.hermitian_deviation();
        let scale = gen.mat.iter().map(|a| a.norm()).fold(1.0, f64::max);
        if dev > HERMITIAN_TOL * scale {
            return Err(Error::ContractViolation(format!(
                "generator is not Hermitian (deviation {dev:e})"
            )));
        }
        // Symmetrize so rounding noise above the diagonal is not amplified.
        let sym = (&gen.mat + gen.mat.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    fn phases(&self, scale: f64) -> DVector<C64> {
        self.values.map(|l| C64::from_polar(1.0, scale * l))
    }

    /// `exp(i·scale·A)` as a dense operator.
    pub fn exp_i(&self, scale: f64) -> FockOperator {
        let phases = self.phases(scale);
        let mut left = self.vectors.clone();
        for (mut col, ph) in left.column_iter_mut().zip(phases.iter()) {
            col *= *ph;
        }
        FockOperator {
            mat: left * self.vectors.adjoint(),
        }
    }

    /// `exp(i·scale·A)|ψ⟩` without forming the operator.
    pub fn apply_exp_i(&self, scale: f64, state: &StateVector) -> Result<StateVector> {
        check_same_dim(self.dim(), state.dim())?;
        let mut coeffs = self.vectors.ad_mul(&state.amps);
        for (c, ph) in coeffs.iter_mut().zip(self.phases(scale).iter()) {
            *c *= ph;
        }
        Ok(StateVector {
            amps: &self.vectors * coeffs,
        })
    }
}

/// `exp(i·scale·gen)` for Hermitian `gen`, by diagonalization.
pub fn expm_hermitian(gen: &FockOperator, scale: f64) -> Result<FockOperator> {
    Ok(HermitianSpectrum::new(gen)?.exp_i(scale))
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityMatrixRepr", into = "DensityMatrixRepr")]
pub struct DensityMatrix {
    mat: DMatrix<C64>,
}

/// JSON layout `{dim, re: [[...]], im: [[...]]}`, row-major.
#[derive(Serialize, Deserialize)]
struct DensityMatrixRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for DensityMatrixRepr {
    fn from(rho: DensityMatrix) -> Self {
        let d = rho.dim();
        let rows = |f: fn(&C64) -> f64| -> Vec<Vec<f64>> {
            (0..d)
                .map(|i| (0..d).map(|j| f(&rho.mat[(i, j)])).collect())
                .collect()
        };
        DensityMatrixRepr {
            dim: d,
            re: rows(|c| c.re),
            im: rows(|c| c.im),
        }
    }
}

impl TryFrom<DensityMatrixRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(repr: DensityMatrixRepr) -> Result<Self> {
        let d = repr.dim;
        let shape_ok = repr.re.len() == d
            && repr.im.len() == d
            && repr.re.iter().chain(repr.im.iter()).all(|row| row.len() == d);
        if !shape_ok {
            return Err(Error::Parse(format!(
                "density matrix rows do not match dim {d}"
            )));
        }
        let mat = DMatrix::from_fn(d, d, |i, j| C64::new(repr.re[i][j], repr.im[i][j]));
        DensityMatrix::from_matrix(mat)
    }
}

impl DensityMatrix {
    /// Validates the Hermitian, unit-trace and PSD invariants.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        let op = FockOperator::from_matrix(mat)?;
        let dev = op.hermitian_deviation();
        if dev > DM_HERMITIAN_TOL {
            return Err(Error::ContractViolation(format!(
                "density matrix not Hermitian (deviation {dev:e})"
            )));
        }
        let rho = DensityMatrix { mat: op.mat };
        let tr = rho.trace();
        if (tr - 1.0).abs() > DM_TRACE_TOL {
            return Err(Error::ContractViolation(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min_eig = rho.eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < DM_EIGEN_FLOOR {
            return Err(Error::ContractViolation(format!(
                "density matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(rho)
    }

    /// `|ψ⟩⟨ψ| / ⟨ψ|ψ⟩`.
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let psi = normalize(state)?;
        Ok(DensityMatrix {
            mat: &psi.amps * psi.amps.adjoint(),
        })
    }

    /// `|ψ⟩⟨ψ|` without normalizing; trace equals `⟨ψ|ψ⟩`.
    pub(crate) fn outer_unnormalized(state: &StateVector) -> Self {
        DensityMatrix {
            mat: &state.amps * state.amps.adjoint(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "operators need dim >= 1",
            });
        }
        Ok(DensityMatrix {
            mat: DMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|c| c.re).sum()
    }

    /// Photon-number populations `ρ_nn`.
    pub fn diagonal(&self) -> Vec<f64> {
        self.mat.diagonal().iter().map(|c| c.re).collect()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(sym).eigenvalues.iter().cloned().collect()
    }

    /// Spectral decomposition `ρ = Σ λ_i |e_i⟩⟨e_i|` sorted by decreasing
    /// weight, dropping the smallest components while their total weight
    /// stays at or below `max_discard`.
    pub fn pure_components(&self, max_discard: f64) -> Vec<(f64, StateVector)> {
        let sym = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut comps: Vec<(f64, StateVector)> = order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > 0.0)
            .map(|i| {
                (
                    eig.eigenvalues[i],
                    StateVector {
                        amps: eig.eigenvectors.column(i).into_owned(),
                    },
                )
            })
            .collect();
        let mut discarded = 0.0;
        while comps.len() > 1 {
            let w = comps.last().map(|c| c.0).unwrap_or(0.0);
            if discarded + w > max_discard {
                break;
            }
            discarded += w;
            comps.pop();
        }
        comps
    }

    /// `U ρ U†`.
    pub fn conjugated(&self, op: &FockOperator) -> Result<DensityMatrix> {
        check_same_dim(self.dim(), op.dim())?;
        Ok(DensityMatrix {
            mat: &op.mat * &self.mat * op.mat.adjoint(),
        })
    }

    /// Embeds into a larger space (zero padding) or keeps the top-left block.
    pub fn resized(&self, dim: usize) -> Result<DensityMatrix> {
        if dim == 0 {
            return Err(Error::InvalidDimension {
                dim,
                reason: "operators need dim >= 1",
            });
        }
        let mut mat = DMatrix::zeros(dim, dim);
        let n = dim.min(self.dim());
        mat.view_mut((0, 0), (n, n))
            .copy_from(&self.mat.view((0, 0), (n, n)));
        Ok(DensityMatrix { mat })
    }
}

/// Types that have an expectation value `⟨A⟩`.
pub trait Expectation {
    fn expect(&self, op: &FockOperator) -> Result<C64>;
}

impl Expectation for StateVector {
    fn expect(&self, op: &FockOperator) -> Result<C64> {
        check_same_dim(op.dim(), self.dim())?;
        Ok(self.amps.dotc(&(&op.mat * &self.amps)))
    }
}

impl Expectation for DensityMatrix {
    fn expect(&self, op: &FockOperator) -> Result<C64> {
        check_same_dim(op.dim(), self.dim())?;
        Ok((&self.mat * &op.mat).trace())
    }
}

pub fn expect<S: Expectation + ?Sized>(state: &S, op: &FockOperator) -> Result<C64> {
    state.expect(op)
}

/// States that can be written as `Σ λ_i |ψ_i⟩⟨ψ_i|`.
pub trait Mixture {
    fn dim(&self) -> usize;
    /// Weights and vectors with positive weight, largest first.
    fn components(&self) -> Vec<(f64, StateVector)>;
    /// Diagonal `⟨n|ρ|n⟩`.
    fn populations(&self) -> Vec<f64>;
    /// Dense `ρ` (for a vector, the unnormalized outer product).
    fn density(&self) -> DMatrix<C64>;
}

impl Mixture for StateVector {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn components(&self) -> Vec<(f64, StateVector)> {
        vec![(1.0, self.clone())]
    }

    fn populations(&self) -> Vec<f64> {
        self.probabilities()
    }

    fn density(&self) -> DMatrix<C64> {
        &self.amps * self.amps.adjoint()
    }
}

impl Mixture for DensityMatrix {
    fn dim(&self) -> usize {
        self.dim()
    }

    fn components(&self) -> Vec<(f64, StateVector)> {
        self.pure_components(0.0)
    }

    fn populations(&self) -> Vec<f64> {
        self.diagonal()
    }

    fn density(&self) -> DMatrix<C64> {
        self.mat.clone()
    }
}
