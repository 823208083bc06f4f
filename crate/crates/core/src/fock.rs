//! Truncated multi-mode Fock spaces and the elementary bosonic operators.
//!
//! Each mode `j` keeps occupation numbers `0..d_j`. Flat indices are
//! row-major over modes (mode 0 varies slowest). The creation operator
//! annihilates the top level, so `creation` stays the exact adjoint of
//! `annihilation`; the price is a rank-one CCR defect at the cutoff.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE};

/// Default ceiling on the truncated probability mass of a coherent state.
pub const DEFAULT_TAIL_GUARD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockBasis {
    cutoffs: Vec<usize>,
}

impl FockBasis {
    pub fn new(cutoffs: Vec<usize>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::InvalidBasis("at least one mode is required".into()));
        }
        if let Some((j, d)) = cutoffs.iter().enumerate().find(|(_, &d)| d < 2) {
            return Err(Error::InvalidBasis(format!("mode {j} has cutoff {d}; need at least 2")));
        }
        let total = cutoffs.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if total.is_none() {
            return Err(Error::InvalidBasis("total dimension overflows".into()));
        }
        Ok(Self { cutoffs })
    }

    pub fn single_mode(cutoff: usize) -> Result<Self> {
        Self::new(vec![cutoff])
    }

    pub fn modes(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn cutoff(&self, mode: usize) -> usize {
        self.cutoffs[mode]
    }

    pub fn total_dim(&self) -> usize {
        self.cutoffs.iter().product()
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoffs[mode + 1..].iter().product()
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.modes() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange { mode, modes: self.modes() })
        }
    }

    /// Flat index of an occupation multi-index.
    pub fn flat_index(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.modes() {
            return Err(Error::DimensionMismatch { expected: self.modes(), found: occupations.len() });
        }
        let mut idx = 0;
        for (j, (&n, &d)) in occupations.iter().zip(&self.cutoffs).enumerate() {
            if n >= d {
                return Err(Error::InvalidArgument(format!("occupation {n} in mode {j} exceeds cutoff {d}")));
            }
            idx = idx * d + n;
        }
        Ok(idx)
    }

    /// Occupation multi-index of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes()];
        for j in (0..self.modes()).rev() {
            occ[j] = flat % self.cutoffs[j];
            flat /= self.cutoffs[j];
        }
        occ
    }

    /// Occupation of `mode` in the basis state with the given flat index.
    pub fn level(&self, flat: usize, mode: usize) -> usize {
        (flat / self.stride(mode)) % self.cutoffs[mode]
    }
}

/// A dense operator on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    basis: FockBasis,
    matrix: CMat,
}

impl Operator {
    pub fn from_matrix(basis: &FockBasis, matrix: CMat) -> Result<Self> {
        let d = basis.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { basis: basis.clone(), matrix })
    }

    pub(crate) fn from_matrix_unchecked(basis: &FockBasis, matrix: CMat) -> Self {
        debug_assert_eq!(matrix.nrows(), basis.total_dim());
        Self { basis: basis.clone(), matrix }
    }

    pub fn identity(basis: &FockBasis) -> Self {
        Self::from_matrix_unchecked(basis, linalg::identity(basis.total_dim()))
    }

    pub fn zero(basis: &FockBasis) -> Self {
        let d = basis.total_dim();
        Self::from_matrix_unchecked(basis, CMat::zeros(d, d))
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dagger(&self) -> Self {
        Self::from_matrix_unchecked(&self.basis, self.matrix.adjoint())
    }

    fn same_basis(&self, other: &Operator) -> Result<()> {
        if self.basis == other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Operator) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_matrix_unchecked(&self.basis, linalg::matmul(&self.matrix, &other.matrix)))
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_matrix_unchecked(&self.basis, &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_matrix_unchecked(&self.basis, &self.matrix - &other.matrix))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_matrix_unchecked(&self.basis, &self.matrix * c)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Self> {
        self.same_basis(other)?;
        Ok(Self::from_matrix_unchecked(&self.basis, linalg::commutator(&self.matrix, &other.matrix)))
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = linalg::identity(self.dim());
        for _ in 0..k {
            out = linalg::matmul(&out, &self.matrix);
        }
        Self::from_matrix_unchecked(&self.basis, out)
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if self.basis != ket.basis {
            return Err(Error::BasisMismatch);
        }
        Ok(Ket { basis: self.basis.clone(), amplitudes: &self.matrix * &ket.amplitudes })
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Largest change of the occupation of `mode` over the nonzero entries,
    /// i.e. the polynomial degree seen in that mode.
    pub fn mode_bandwidth(&self, mode: usize) -> usize {
        let floor = 1e-14 * linalg::max_abs(&self.matrix);
        let mut band = 0;
        for c in 0..self.dim() {
            let nc = self.basis.level(c, mode);
            for r in 0..self.dim() {
                if self.matrix[(r, c)].norm() > floor {
                    band = band.max(self.basis.level(r, mode).abs_diff(nc));
                }
            }
        }
        band
    }
}

/// A state vector on the truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    basis: FockBasis,
    amplitudes: CVec,
}

impl Ket {
    pub fn from_amplitudes(basis: &FockBasis, amplitudes: CVec) -> Result<Self> {
        if amplitudes.len() != basis.total_dim() {
            return Err(Error::DimensionMismatch { expected: basis.total_dim(), found: amplitudes.len() });
        }
        Ok(Self { basis: basis.clone(), amplitudes })
    }

    /// The number state `|n_1, …, n_m⟩`.
    pub fn fock(basis: &FockBasis, occupations: &[usize]) -> Result<Self> {
        let idx = basis.flat_index(occupations)?;
        let mut v = CVec::zeros(basis.total_dim());
        v[idx] = ONE;
        Ok(Self { basis: basis.clone(), amplitudes: v })
    }

    pub fn vacuum(basis: &FockBasis) -> Self {
        let mut v = CVec::zeros(basis.total_dim());
        v[0] = ONE;
        Self { basis: basis.clone(), amplitudes: v }
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidArgument("cannot normalize a zero or non-finite ket".into()));
        }
        Ok(Self { basis: self.basis.clone(), amplitudes: &self.amplitudes / C64::new(n, 0.0) })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// `|self⟩⟨self|`.
    pub fn projector(&self) -> CMat {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// A truncated, renormalized coherent state together with the probability
/// mass its untruncated expansion had beyond the cutoff.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub ket: Ket,
    pub tail_mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parity {
    Plus,
    Minus,
}

fn single_mode_ladder(d: usize) -> CMat {
    let mut a = CMat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    a
}

/// Place a single-mode matrix on `mode`, identity elsewhere.
pub fn embed_single_mode(basis: &FockBasis, mode: usize, op: &CMat) -> Result<Operator> {
    basis.check_mode(mode)?;
    let d = basis.cutoff(mode);
    if op.nrows() != d || op.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: op.nrows().max(op.ncols()) });
    }
    let before: usize = basis.cutoffs()[..mode].iter().product();
    let after: usize = basis.cutoffs()[mode + 1..].iter().product();
    let mut m = op.clone();
    if after > 1 {
        m = linalg::kron(&m, &linalg::identity(after));
    }
    if before > 1 {
        m = linalg::kron(&linalg::identity(before), &m);
    }
    Ok(Operator::from_matrix_unchecked(basis, m))
}

/// `a_j`: `a|n⟩ = √n |n−1⟩` on `mode`.
pub fn annihilation(basis: &FockBasis, mode: usize) -> Result<Operator> {
    basis.check_mode(mode)?;
    embed_single_mode(basis, mode, &single_mode_ladder(basis.cutoff(mode)))
}

/// `a†_j`, the exact adjoint of [`annihilation`]; the top level maps to zero.
pub fn creation(basis: &FockBasis, mode: usize) -> Result<Operator> {
    Ok(annihilation(basis, mode)?.dagger())
}

/// `N_j = a†_j a_j`, diagonal with the occupation of `mode`.
pub fn number_operator(basis: &FockBasis, mode: usize) -> Result<Operator> {
    basis.check_mode(mode)?;
    let d = basis.total_dim();
    let diag = CVec::from_fn(d, |i, _| C64::new(basis.level(i, mode) as f64, 0.0));
    Ok(Operator::from_matrix_unchecked(basis, CMat::from_diagonal(&diag)))
}

/// `(−1)^{N_j}`.
pub fn parity_operator(basis: &FockBasis, mode: usize) -> Result<Operator> {
    basis.check_mode(mode)?;
    let d = basis.total_dim();
    let diag = CVec::from_fn(d, |i, _| if basis.level(i, mode).is_multiple_of(2) { ONE } else { -ONE });
    Ok(Operator::from_matrix_unchecked(basis, CMat::from_diagonal(&diag)))
}

/// Untruncated-normalized coefficients `e^{-|α|²/2} α^n / √n!` for `n < d`,
/// and the mass `Σ_{n ≥ d} |c_n|²` that the cutoff discards.
pub fn coherent_coefficients(alpha: C64, d: usize) -> (Vec<C64>, f64) {
    let r2 = alpha.norm_sqr();
    let mut c = C64::new((-r2 / 2.0).exp(), 0.0);
    let mut coeffs = Vec::with_capacity(d);
    for n in 0..d {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        coeffs.push(c);
    }
    // Continue the recursion past the cutoff until the terms are negligible.
    let mut tail = 0.0;
    let mut term = c;
    let mut n = d;
    let stop = d + 64 + (10.0 * (r2 + 10.0)) as usize;
    while n < stop {
        term = term * alpha / (n as f64).sqrt();
        let t = term.norm_sqr();
        tail += t;
        if (n as f64) > r2 && t < 1e-34 {
            break;
        }
        n += 1;
    }
    (coeffs, tail)
}

/// Product coherent state `|α_1⟩ ⊗ … ⊗ |α_m⟩`, truncated and renormalized.
pub fn coherent_state(basis: &FockBasis, alphas: &[C64]) -> Result<CoherentState> {
    coherent_state_guarded(basis, alphas, DEFAULT_TAIL_GUARD)
}

pub fn coherent_state_guarded(basis: &FockBasis, alphas: &[C64], guard: f64) -> Result<CoherentState> {
    if alphas.len() != basis.modes() {
        return Err(Error::DimensionMismatch { expected: basis.modes(), found: alphas.len() });
    }
    let mut log_keep = 0.0;
    let mut per_mode = Vec::with_capacity(alphas.len());
    for (j, &alpha) in alphas.iter().enumerate() {
        if !(alpha.re.is_finite() && alpha.im.is_finite()) {
            return Err(Error::NonFinite("coherent amplitude"));
        }
        let (coeffs, tail) = coherent_coefficients(alpha, basis.cutoff(j));
        log_keep += (-tail).ln_1p();
        per_mode.push(coeffs);
    }
    let tail_mass = -log_keep.exp_m1();
    if tail_mass > guard {
        return Err(Error::TruncationGuard { tail_mass, threshold: guard });
    }
    let d = basis.total_dim();
    let amps = CVec::from_fn(d, |i, _| {
        let occ = basis.multi_index(i);
        occ.iter().enumerate().fold(ONE, |acc, (j, &n)| acc * per_mode[j][n])
    });
    let ket = Ket::from_amplitudes(basis, amps)?.normalized()?;
    Ok(CoherentState { ket, tail_mass })
}

/// Tail mass of `|α⟩` on `mode` without building the state.
pub fn coherent_tail_mass(basis: &FockBasis, mode: usize, alpha: C64) -> Result<f64> {
    basis.check_mode(mode)?;
    Ok(coherent_coefficients(alpha, basis.cutoff(mode)).1)
}

/// Even (`Plus`) or odd (`Minus`) cat state `(|α⟩ ± |−α⟩)/norm` on `mode`,
/// vacuum on the other modes.
pub fn cat_state(basis: &FockBasis, mode: usize, alpha: C64, parity: Parity) -> Result<Ket> {
    cat_state_guarded(basis, mode, alpha, parity, DEFAULT_TAIL_GUARD)
}

pub fn cat_state_guarded(basis: &FockBasis, mode: usize, alpha: C64, parity: Parity, guard: f64) -> Result<Ket> {
    basis.check_mode(mode)?;
    let d = basis.cutoff(mode);
    let (coeffs, tail) = coherent_coefficients(alpha, d);
    if tail > guard {
        return Err(Error::TruncationGuard { tail_mass: tail, threshold: guard });
    }
    let keep = match parity {
        Parity::Plus => 0,
        Parity::Minus => 1,
    };
    let mut single = CVec::zeros(d);
    for (n, c) in coeffs.iter().enumerate() {
        if n % 2 == keep {
            single[n] = c * 2.0;
        }
    }
    if single.norm() == 0.0 {
        return Err(Error::InvalidArgument("odd cat state is undefined at α = 0".into()));
    }
    let total = basis.total_dim();
    let mut amps = CVec::zeros(total);
    for i in 0..total {
        let occ = basis.multi_index(i);
        if occ.iter().enumerate().all(|(j, &n)| j == mode || n == 0) {
            amps[i] = single[occ[mode]];
        }
    }
    Ket::from_amplitudes(basis, amps)?.normalized()
}
