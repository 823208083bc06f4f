//! Generators of dynamics on density operators.
//!
//! A [`Liouvillian`] is kept in GKSL form
//! `L(x) = −i[H, x] + Σ_j (L_j x L_j† − ½{L_j†L_j, x})` and can be applied
//! directly ("action form") or flattened to a `D² × D²` matrix. Flattening is
//! column-stacking: `vec(A x B) = (Bᵀ ⊗ A) vec(x)`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Ket, Operator};
use crate::linalg::{self, CMat, C64, I, ONE};

/// Largest Hilbert dimension for which flattened `D² × D²` matrices are built.
pub const DEFAULT_DENSE_LIMIT: usize = 64;

/// Hermitian tolerance, relative to the largest entry.
const HERMITIAN_TOL: f64 = 1e-10;

/// Hermitian and unit-trace tolerance for density operators.
const STATE_TOL: f64 = 1e-12;

fn relative_hermiticity_defect(m: &CMat) -> f64 {
    linalg::hermiticity_defect(m) / linalg::max_abs(m).max(1.0)
}

/// A Hermitian trace-class operator on the truncated space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    basis: FockBasis,
    matrix: CMat,
}

impl DensityOperator {
    /// Wraps a Hermitian matrix; trace and positivity are not required.
    pub fn new(basis: &FockBasis, matrix: CMat) -> Result<Self> {
        let d = basis.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: matrix.nrows().max(matrix.ncols()) });
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite("density operator"));
        }
        let defect = relative_hermiticity_defect(&matrix);
        if defect > STATE_TOL {
            return Err(Error::NotHermitian { defect });
        }
        Ok(Self { basis: basis.clone(), matrix })
    }

    pub(crate) fn from_raw(basis: &FockBasis, matrix: CMat) -> Self {
        Self { basis: basis.clone(), matrix }
    }

    /// Checks unit trace and positivity in addition to Hermiticity.
    pub fn physical(basis: &FockBasis, matrix: CMat) -> Result<Self> {
        let rho = Self::new(basis, matrix)?;
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidArgument(format!("trace {tr} is not 1")));
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-10 {
            return Err(Error::NotPositive { min_eig });
        }
        Ok(rho)
    }

    pub fn from_ket(ket: &Ket) -> Self {
        Self { basis: ket.basis().clone(), matrix: ket.projector() }
    }

    /// Number-state projector `|n⟩⟨n|`.
    pub fn fock(basis: &FockBasis, occupations: &[usize]) -> Result<Self> {
        Ok(Self::from_ket(&Ket::fock(basis, occupations)?))
    }

    pub fn maximally_mixed(basis: &FockBasis) -> Self {
        let d = basis.total_dim();
        Self { basis: basis.clone(), matrix: linalg::identity(d) / C64::new(d as f64, 0.0) }
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

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::eigvalsh(&self.matrix).first().copied().unwrap_or(0.0)
    }

    /// Parses the JSON state-file format:
    /// `{"cutoffs": [..], "real": [[row..]..], "imag": [[row..]..]}` with
    /// row-major nested arrays. `imag` may be omitted. The state must be
    /// physical (Hermitian, unit trace, positive semi-definite).
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: StateFile =
            serde_json::from_str(text).map_err(|e| Error::Parse { what: "state file", message: e.to_string() })?;
        let basis = FockBasis::new(file.cutoffs.clone())
            .map_err(|e| Error::Parse { what: "state file", message: e.to_string() })?;
        let d = basis.total_dim();
        let bad_shape = |name: &str| Error::Parse { what: "state file", message: format!("`{name}` must be {d}×{d}") };
        if file.real.len() != d || file.real.iter().any(|r| r.len() != d) {
            return Err(bad_shape("real"));
        }
        if let Some(im) = &file.imag {
            if im.len() != d || im.iter().any(|r| r.len() != d) {
                return Err(bad_shape("imag"));
            }
        }
        let m = CMat::from_fn(d, d, |r, c| {
            let im = file.imag.as_ref().map_or(0.0, |im| im[r][c]);
            C64::new(file.real[r][c], im)
        });
        Self::physical(&basis, m).map_err(|e| Error::Parse { what: "state file", message: e.to_string() })
    }

    pub fn to_json_string(&self) -> String {
        let d = self.dim();
        let file = StateFile {
            cutoffs: self.basis.cutoffs().to_vec(),
            real: (0..d).map(|r| (0..d).map(|c| self.matrix[(r, c)].re).collect()).collect(),
            imag: Some((0..d).map(|r| (0..d).map(|c| self.matrix[(r, c)].im).collect()).collect()),
        };
        serde_json::to_string(&file).expect("state file serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    cutoffs: Vec<usize>,
    real: Vec<Vec<f64>>,
    #[serde(default)]
    imag: Option<Vec<Vec<f64>>>,
}

/// A linear map on `D × D` matrices.
pub trait SuperOperator: Send + Sync {
    /// Hilbert-space dimension `D`.
    fn hilbert_dim(&self) -> usize;

    fn apply(&self, x: &CMat) -> CMat;

    /// Adjoint with respect to the Hilbert-Schmidt inner product.
    fn apply_adjoint(&self, y: &CMat) -> CMat;

    /// Upper bound on the Hilbert-Schmidt induced operator norm.
    fn norm_bound(&self) -> f64;

    /// Flattened matrix, built column by column from matrix units.
    fn to_matrix(&self) -> CMat {
        let d = self.hilbert_dim();
        let mut out = CMat::zeros(d * d, d * d);
        let mut unit = CMat::zeros(d, d);
        for c in 0..d {
            for r in 0..d {
                unit[(r, c)] = ONE;
                let image = self.apply(&unit);
                out.column_mut(c * d + r).copy_from_slice(image.as_slice());
                unit[(r, c)] = C64::new(0.0, 0.0);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Jump {
    op: CMat,
    op_dag: CMat,
    op_dag_op: CMat,
}

impl Jump {
    fn new(op: CMat) -> Self {
        let op_dag = op.adjoint();
        let op_dag_op = linalg::matmul(&op_dag, &op);
        Self { op, op_dag, op_dag_op }
    }
}

/// GKSL generator with an optional Hamiltonian and any number of jumps.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    basis: FockBasis,
    hamiltonian: Option<CMat>,
    jumps: Vec<Jump>,
    cached: Option<SuperOperatorMatrix>,
    fingerprint: u64,
}

impl PartialEq for Liouvillian {
    fn eq(&self, other: &Self) -> bool {
        self.basis == other.basis && self.hamiltonian == other.hamiltonian && self.jumps == other.jumps
    }
}

impl Liouvillian {
    fn assemble(basis: &FockBasis, hamiltonian: Option<CMat>, jumps: Vec<CMat>) -> Self {
        let jumps: Vec<Jump> = jumps.into_iter().map(Jump::new).collect();
        let mut hasher = DefaultHasher::new();
        basis.hash(&mut hasher);
        let mut feed = |m: &CMat| {
            m.nrows().hash(&mut hasher);
            for z in m.iter() {
                z.re.to_bits().hash(&mut hasher);
                z.im.to_bits().hash(&mut hasher);
            }
        };
        if let Some(h) = &hamiltonian {
            feed(h);
        }
        for j in &jumps {
            feed(&j.op);
        }
        let fingerprint = hasher.finish();
        Self { basis: basis.clone(), hamiltonian, jumps, cached: None, fingerprint }
    }

    pub fn zero(basis: &FockBasis) -> Self {
        Self::assemble(basis, None, Vec::new())
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn hamiltonian(&self) -> Option<Operator> {
        self.hamiltonian.as_ref().map(|h| Operator::from_matrix_unchecked(&self.basis, h.clone()))
    }

    pub fn jumps(&self) -> Vec<Operator> {
        self.jumps.iter().map(|j| Operator::from_matrix_unchecked(&self.basis, j.op.clone())).collect()
    }

    pub(crate) fn hamiltonian_matrix(&self) -> Option<&CMat> {
        self.hamiltonian.as_ref()
    }

    pub(crate) fn jump_matrices(&self) -> impl Iterator<Item = &CMat> {
        self.jumps.iter().map(|j| &j.op)
    }

    /// Stable identity of the generator's matrices, used as a cache key.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// No jump operators: the generator is `−i[H, ·]` and the dynamics is
    /// reversible.
    pub fn is_pure_commutator(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.jumps.iter().all(|j| linalg::max_abs(&j.op) == 0.0)
            && self.hamiltonian.as_ref().is_none_or(|h| linalg::max_abs(h) == 0.0)
    }

    /// `self + other` (Hamiltonians add, jump lists concatenate).
    pub fn sum(&self, other: &Liouvillian) -> Result<Liouvillian> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch);
        }
        let h = match (&self.hamiltonian, &other.hamiltonian) {
            (Some(a), Some(b)) => Some(a + b),
            (Some(a), None) | (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        };
        let jumps = self.jumps.iter().chain(&other.jumps).map(|j| j.op.clone()).collect();
        Ok(Self::assemble(&self.basis, h, jumps))
    }

    /// `c · self` for `c ≥ 0` (jumps scale by `√c`).
    pub fn scaled(&self, c: f64) -> Result<Liouvillian> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!("generator scale {c} must be finite and non-negative")));
        }
        let h = self.hamiltonian.as_ref().map(|h| h * C64::new(c, 0.0));
        let jumps = self.jumps.iter().map(|j| &j.op * C64::new(c.sqrt(), 0.0)).collect();
        Ok(Self::assemble(&self.basis, h, jumps))
    }

    /// Computes and stores the flattened matrix (no lazy mutation later).
    pub fn finalize(mut self, dense_limit: usize) -> Result<Self> {
        let m = flatten_with_limit(&self, dense_limit)?;
        self.cached = Some(m);
        Ok(self)
    }

    pub fn cached_matrix(&self) -> Option<&SuperOperatorMatrix> {
        self.cached.as_ref()
    }

    /// Per-mode polynomial degree of the generator's operators; states
    /// supported below `cutoff − degree` see the untruncated action.
    pub fn degree_margin(&self) -> Vec<usize> {
        let ops: Vec<Operator> = self.hamiltonian().into_iter().chain(self.jumps()).collect();
        (0..self.basis.modes())
            .map(|mode| ops.iter().map(|o| o.mode_bandwidth(mode)).max().unwrap_or(0))
            .collect()
    }

    /// Heisenberg-picture action `L†(y) = i[H, y] + Σ (L_j† y L_j − ½{L_j†L_j, y})`.
    pub fn heisenberg(&self, y: &CMat) -> CMat {
        self.apply_adjoint(y)
    }
}

impl SuperOperator for Liouvillian {
    fn hilbert_dim(&self) -> usize {
        self.basis.total_dim()
    }

    fn apply(&self, x: &CMat) -> CMat {
        let d = x.nrows();
        let mut out = CMat::zeros(d, d);
        if let Some(h) = &self.hamiltonian {
            out += linalg::commutator(h, x) * (-I);
        }
        for j in &self.jumps {
            let lx = linalg::matmul(&j.op, x);
            out += linalg::matmul(&lx, &j.op_dag);
            out -= linalg::anticommutator(&j.op_dag_op, x) * C64::new(0.5, 0.0);
        }
        out
    }

    fn apply_adjoint(&self, y: &CMat) -> CMat {
        let d = y.nrows();
        let mut out = CMat::zeros(d, d);
        if let Some(h) = &self.hamiltonian {
            out += linalg::commutator(h, y) * I;
        }
        for j in &self.jumps {
            let ly = linalg::matmul(&j.op_dag, y);
            out += linalg::matmul(&ly, &j.op);
            out -= linalg::anticommutator(&j.op_dag_op, y) * C64::new(0.5, 0.0);
        }
        out
    }

    fn norm_bound(&self) -> f64 {
        let h = self.hamiltonian.as_ref().map_or(0.0, |h| 2.0 * linalg::spectral_norm(h));
        h + self.jumps.iter().map(|j| 2.0 * linalg::spectral_norm(&j.op).powi(2)).sum::<f64>()
    }

    fn to_matrix(&self) -> CMat {
        if let Some(m) = &self.cached {
            return m.matrix.clone();
        }
        let d = self.hilbert_dim();
        let id = linalg::identity(d);
        let mut out = CMat::zeros(d * d, d * d);
        if let Some(h) = &self.hamiltonian {
            out += (linalg::kron(&id, h) - linalg::kron(&h.transpose(), &id)) * (-I);
        }
        for j in &self.jumps {
            out += linalg::kron(&j.op.conjugate(), &j.op);
            out -= (linalg::kron(&id, &j.op_dag_op) + linalg::kron(&j.op_dag_op.transpose(), &id)) * C64::new(0.5, 0.0);
        }
        out
    }
}

fn check_square(basis: &FockBasis, m: &Operator) -> Result<()> {
    if m.basis() != basis {
        return Err(Error::BasisMismatch);
    }
    Ok(())
}

/// `x ↦ −i[H, x]`. `H` must be Hermitian.
pub fn commutator_generator(h: &Operator) -> Result<Liouvillian> {
    let defect = relative_hermiticity_defect(h.matrix());
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Ok(Liouvillian::assemble(h.basis(), Some(h.matrix().clone()), Vec::new()))
}

/// `x ↦ L x L† − ½{L†L, x}`.
pub fn dissipator(l: &Operator) -> Liouvillian {
    Liouvillian::assemble(l.basis(), None, vec![l.matrix().clone()])
}

/// Full GKSL generator; all operators must share one basis.
pub fn gksl(basis: &FockBasis, h: Option<&Operator>, jumps: &[Operator]) -> Result<Liouvillian> {
    if let Some(h) = h {
        check_square(basis, h)?;
        let defect = relative_hermiticity_defect(h.matrix());
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
    }
    for j in jumps {
        check_square(basis, j)?;
    }
    Ok(Liouvillian::assemble(
        basis,
        h.map(|h| h.matrix().clone()),
        jumps.iter().map(|j| j.matrix().clone()).collect(),
    ))
}

/// A flattened superoperator: `D² × D²` matrix acting on `vec(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperatorMatrix {
    dim: usize,
    matrix: CMat,
}

impl SuperOperatorMatrix {
    pub fn new(dim: usize, matrix: CMat) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: matrix.nrows().max(matrix.ncols()) });
        }
        Ok(Self { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self { dim, matrix: linalg::identity(dim * dim) }
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SuperOperatorMatrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        Ok(Self { dim: self.dim, matrix: linalg::matmul(&self.matrix, &other.matrix) })
    }
}

impl SuperOperator for SuperOperatorMatrix {
    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &CMat) -> CMat {
        linalg::unvec(&(&self.matrix * linalg::vec_of(x)), self.dim)
    }

    fn apply_adjoint(&self, y: &CMat) -> CMat {
        linalg::unvec(&(self.matrix.adjoint() * linalg::vec_of(y)), self.dim)
    }

    fn norm_bound(&self) -> f64 {
        linalg::frobenius(&self.matrix)
    }

    fn to_matrix(&self) -> CMat {
        self.matrix.clone()
    }
}

/// Flattens a generator, refusing when `D` exceeds [`DEFAULT_DENSE_LIMIT`].
pub fn flatten(op: &dyn SuperOperator) -> Result<SuperOperatorMatrix> {
    flatten_with_limit(op, DEFAULT_DENSE_LIMIT)
}

pub fn flatten_with_limit(op: &dyn SuperOperator, dense_limit: usize) -> Result<SuperOperatorMatrix> {
    let d = op.hilbert_dim();
    if d > dense_limit {
        return Err(Error::DenseLimitExceeded { dim: d * d, limit: dense_limit * dense_limit });
    }
    Ok(SuperOperatorMatrix { dim: d, matrix: op.to_matrix() })
}

/// `x ↦ P x P` for an idempotent `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorSuperOp {
    projector: Operator,
    projector_dag: CMat,
}

impl ProjectorSuperOp {
    pub fn new(p: &Operator) -> Result<Self> {
        let m = p.matrix();
        let defect = linalg::max_abs(&(linalg::matmul(m, m) - m));
        if defect > 1e-10 {
            return Err(Error::NotIdempotent { defect });
        }
        Ok(Self { projector: p.clone(), projector_dag: m.adjoint() })
    }

    pub fn projector(&self) -> &Operator {
        &self.projector
    }

    pub fn basis(&self) -> &FockBasis {
        self.projector.basis()
    }

    /// `x − P x P`.
    pub fn complement(&self, x: &CMat) -> CMat {
        x - self.apply(x)
    }
}

impl SuperOperator for ProjectorSuperOp {
    fn hilbert_dim(&self) -> usize {
        self.projector.dim()
    }

    fn apply(&self, x: &CMat) -> CMat {
        let p = self.projector.matrix();
        linalg::matmul(&linalg::matmul(p, x), p)
    }

    fn apply_adjoint(&self, y: &CMat) -> CMat {
        linalg::matmul(&linalg::matmul(&self.projector_dag, y), &self.projector_dag)
    }

    fn norm_bound(&self) -> f64 {
        linalg::spectral_norm(self.projector.matrix()).powi(2)
    }
}

/// `projector_superop(P)`.
pub fn projector_superop(p: &Operator) -> Result<ProjectorSuperOp> {
    ProjectorSuperOp::new(p)
}

/// The compressed generator `P ∘ L ∘ P`.
#[derive(Debug, Clone)]
pub struct Compressed<G> {
    pub projector: ProjectorSuperOp,
    pub inner: G,
}

impl<G: SuperOperator> SuperOperator for Compressed<G> {
    fn hilbert_dim(&self) -> usize {
        self.inner.hilbert_dim()
    }

    fn apply(&self, x: &CMat) -> CMat {
        self.projector.apply(&self.inner.apply(&self.projector.apply(x)))
    }

    fn apply_adjoint(&self, y: &CMat) -> CMat {
        self.projector.apply_adjoint(&self.inner.apply_adjoint(&self.projector.apply_adjoint(y)))
    }

    fn norm_bound(&self) -> f64 {
        self.inner.norm_bound() * self.projector.norm_bound().powi(2)
    }
}
