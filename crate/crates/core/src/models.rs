//! Concrete generators: polynomial Hamiltonians in the ladder operators, the
//! quantum Ornstein-Uhlenbeck generator, l-photon driven dissipation and the
//! cat-code objects used by the Zeno gate.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, Operator, Parity, DEFAULT_TAIL_GUARD};
use crate::linalg::{self, CMat, C64};
use crate::liouville::{commutator_generator, gksl, DensityOperator, Liouvillian, SuperOperator};
use crate::metrics::trace_norm;
use crate::propagators::{block_generator, expm, reachable_block, Modulation, Schedule, ScheduleTerm};

/// Tolerance for the Hermiticity of assembled Hamiltonians, relative to the
/// largest entry.
pub const HAMILTONIAN_TOL: f64 = 1e-12;
/// Largest reachable block handled by [`stationary_state`].
pub const STATIONARY_BLOCK_LIMIT: usize = 1600;

/// `λ · (a†_mode)^creation · a_mode^annihilation`, normal ordered.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub mode: usize,
    pub creation: u32,
    pub annihilation: u32,
    /// `[re, im]`
    pub coeff: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<Modulation>,
}

/// `c · Π_j N_j^{powers[j]}`. The coefficient is real so the term is Hermitian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumberTerm {
    pub powers: Vec<u32>,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<Modulation>,
}

fn default_max_degree() -> u32 {
    4
}

/// Polynomial in the ladder operators of each mode plus a polynomial in the
/// number operators.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSpec {
    #[serde(default)]
    pub monomials: Vec<Monomial>,
    #[serde(default)]
    pub number_terms: Vec<NumberTerm>,
    #[serde(default = "default_max_degree")]
    pub max_degree: u32,
}

impl Default for PolynomialSpec {
    fn default() -> Self {
        Self { monomials: Vec::new(), number_terms: Vec::new(), max_degree: default_max_degree() }
    }
}

/// Groups terms sharing a coefficient function. Serializable modulations
/// compare by value, custom ones by identity.
fn modulation_key(m: &Option<Modulation>) -> String {
    match m {
        None => "const".to_string(),
        Some(Modulation::Custom(f)) => format!("custom:{:p}", Arc::as_ptr(&f.0)),
        Some(m) => serde_json::to_string(m).unwrap_or_else(|_| format!("{m:?}")),
    }
}

impl PolynomialSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: PolynomialSpec =
            toml::from_str(text).map_err(|e| Error::Parse { what: "polynomial spec", message: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty() && self.number_terms.is_empty()
    }

    pub fn is_time_dependent(&self) -> bool {
        self.monomials.iter().map(|m| &m.modulation).chain(self.number_terms.iter().map(|t| &t.modulation)).any(
            |m| match m {
                None => false,
                Some(m) => !m.is_constant(),
            },
        )
    }

    /// Finite coefficients and the degree bound.
    pub fn validate(&self) -> Result<()> {
        for m in &self.monomials {
            if !(m.coeff[0].is_finite() && m.coeff[1].is_finite()) {
                return Err(Error::InvalidPolynomial(format!("non-finite coefficient on mode {}", m.mode)));
            }
            let degree = m.creation + m.annihilation;
            if degree > self.max_degree {
                return Err(Error::InvalidPolynomial(format!(
                    "monomial (a†)^{} a^{} has degree {degree} above the maximum {}",
                    m.creation, m.annihilation, self.max_degree
                )));
            }
        }
        for t in &self.number_terms {
            if !t.coeff.is_finite() {
                return Err(Error::InvalidPolynomial("non-finite number-term coefficient".into()));
            }
            let degree: u32 = 2 * t.powers.iter().sum::<u32>();
            if degree > self.max_degree {
                return Err(Error::InvalidPolynomial(format!(
                    "number term of ladder degree {degree} exceeds the maximum {}",
                    self.max_degree
                )));
            }
        }
        Ok(())
    }

    /// `λ_{kl} = conj(λ_{lk})` per mode and coefficient function.
    pub fn check_hermitian(&self) -> Result<()> {
        let mut sums: BTreeMap<(usize, u32, u32, String), C64> = BTreeMap::new();
        for m in &self.monomials {
            *sums.entry((m.mode, m.creation, m.annihilation, modulation_key(&m.modulation))).or_default() +=
                C64::new(m.coeff[0], m.coeff[1]);
        }
        for ((mode, k, l, key), c) in &sums {
            let partner = sums.get(&(*mode, *l, *k, key.clone())).copied().unwrap_or_default();
            let defect = (c - partner.conj()).norm();
            if defect > HAMILTONIAN_TOL * c.norm().max(1.0) {
                return Err(Error::InvalidPolynomial(format!(
                    "coefficient of (a†)^{k} a^{l} on mode {mode} is not the conjugate of its (a†)^{l} a^{k} partner"
                )));
            }
        }
        Ok(())
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        for m in &self.monomials {
            basis.check_mode(m.mode)?;
        }
        for t in &self.number_terms {
            if t.powers.len() > basis.modes() {
                return Err(Error::ModeOutOfRange { mode: t.powers.len() - 1, modes: basis.modes() });
            }
        }
        Ok(())
    }
}

fn monomial_matrix(basis: &FockBasis, m: &Monomial) -> Result<CMat> {
    let a = fock::annihilation(basis, m.mode)?;
    let ad = a.dagger();
    Ok(ad.pow(m.creation).compose(&a.pow(m.annihilation))?.into_matrix())
}

fn number_term_matrix(basis: &FockBasis, t: &NumberTerm) -> CMat {
    let d = basis.total_dim();
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        let v: f64 = t.powers.iter().enumerate().map(|(j, &p)| (basis.level(i, j) as f64).powi(p as i32)).product();
        m[(i, i)] = C64::new(v, 0.0);
    }
    m
}

/// The polynomial with every coefficient function evaluated at `t`; no
/// Hermiticity requirement.
pub fn build_operator(spec: &PolynomialSpec, basis: &FockBasis, t: f64) -> Result<Operator> {
    spec.validate()?;
    spec.check_basis(basis)?;
    let d = basis.total_dim();
    let mut acc = CMat::zeros(d, d);
    for m in &spec.monomials {
        let f = m.modulation.as_ref().map_or(1.0, |g| g.at(t));
        let c = C64::new(m.coeff[0], m.coeff[1]) * f;
        if c != C64::new(0.0, 0.0) {
            acc += monomial_matrix(basis, m)? * c;
        }
    }
    for term in &spec.number_terms {
        let f = term.modulation.as_ref().map_or(1.0, |g| g.at(t));
        let c = term.coeff * f;
        if c != 0.0 {
            acc += number_term_matrix(basis, term) * C64::new(c, 0.0);
        }
    }
    if !linalg::is_finite(&acc) {
        return Err(Error::NonFinite("polynomial coefficient"));
    }
    Operator::from_matrix(basis, acc)
}

/// Hermitian Hamiltonian with coefficient functions evaluated at `t`.
pub fn build_hamiltonian_at(spec: &PolynomialSpec, basis: &FockBasis, t: f64) -> Result<Operator> {
    spec.check_hermitian()?;
    let op = build_operator(spec, basis, t)?;
    let scale = linalg::max_abs(op.matrix()).max(1.0);
    let defect = op.hermiticity_defect() / scale;
    if defect > HAMILTONIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    Operator::from_matrix(basis, linalg::hermitian_part(op.matrix()))
}

/// [`build_hamiltonian_at`] with `t = 0`.
pub fn build_hamiltonian(spec: &PolynomialSpec, basis: &FockBasis) -> Result<Operator> {
    build_hamiltonian_at(spec, basis, 0.0)
}

/// One commutator term `f_k(t) · (−i[H_k, ·])` per distinct coefficient function.
pub fn schedule_from_spec(spec: &PolynomialSpec, basis: &FockBasis, horizon: f64) -> Result<Schedule> {
    spec.check_hermitian()?;
    let mut groups: BTreeMap<String, (Option<Modulation>, PolynomialSpec)> = BTreeMap::new();
    for m in &spec.monomials {
        let entry = groups.entry(modulation_key(&m.modulation)).or_insert_with(|| {
            (m.modulation.clone(), PolynomialSpec { max_degree: spec.max_degree, ..Default::default() })
        });
        entry.1.monomials.push(Monomial { modulation: None, ..m.clone() });
    }
    for t in &spec.number_terms {
        let entry = groups.entry(modulation_key(&t.modulation)).or_insert_with(|| {
            (t.modulation.clone(), PolynomialSpec { max_degree: spec.max_degree, ..Default::default() })
        });
        entry.1.number_terms.push(NumberTerm { modulation: None, ..t.clone() });
    }
    let mut terms = Vec::with_capacity(groups.len());
    for (_, (modulation, part)) in groups {
        let h = build_hamiltonian(&part, basis)?;
        terms.push(ScheduleTerm {
            generator: commutator_generator(&h)?,
            modulation: modulation.unwrap_or(Modulation::constant(1.0)),
        });
    }
    Schedule::new(basis, horizon, terms)
}

fn check_rate(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidArgument(format!("{name} = {v} must be finite and non-negative")));
    }
    Ok(())
}

/// Quantum Ornstein-Uhlenbeck generator `λ² D[a] + μ² D[a†]` on `mode`.
pub fn ou_generator(basis: &FockBasis, mode: usize, lambda: f64, mu: f64) -> Result<Liouvillian> {
    let (loss, gain) = ou_split(basis, mode, lambda, mu)?;
    loss.sum(&gain)
}

/// The loss part `λ² D[a]` and the gain part `μ² D[a†]` separately. A zero
/// rate gives the zero generator.
pub fn ou_split(basis: &FockBasis, mode: usize, lambda: f64, mu: f64) -> Result<(Liouvillian, Liouvillian)> {
    check_rate("λ", lambda)?;
    check_rate("μ", mu)?;
    let a = fock::annihilation(basis, mode)?;
    let part = |op: Operator, rate: f64| -> Result<Liouvillian> {
        if rate == 0.0 {
            Ok(Liouvillian::zero(basis))
        } else {
            gksl(basis, None, &[op.scale(C64::new(rate, 0.0))])
        }
    };
    Ok((part(a.clone(), lambda)?, part(a.dagger(), mu)?))
}

fn check_alpha_guard(basis: &FockBasis, mode: usize, alpha: C64) -> Result<()> {
    let tail = fock::coherent_tail_mass(basis, mode, alpha)?;
    if tail > DEFAULT_TAIL_GUARD {
        return Err(Error::TruncationGuard { tail_mass: tail, threshold: DEFAULT_TAIL_GUARD });
    }
    Ok(())
}

/// `a^l − α^l` on `mode`.
pub fn code_jump(basis: &FockBasis, mode: usize, l: u32, alpha: C64) -> Result<Operator> {
    if l == 0 {
        return Err(Error::InvalidArgument("photon number l must be ≥ 1".into()));
    }
    let a = fock::annihilation(basis, mode)?;
    a.pow(l).sub(&Operator::identity(basis).scale(alpha.powu(l)))
}

/// l-photon driven dissipation `D[a^l − α^l]`.
pub fn l_photon_dissipation(basis: &FockBasis, mode: usize, l: u32, alpha: C64) -> Result<Liouvillian> {
    basis.check_mode(mode)?;
    if l == 0 {
        return Err(Error::InvalidArgument("photon number l must be ≥ 1".into()));
    }
    let needed = l as usize + 2;
    if basis.cutoff(mode) < needed {
        return Err(Error::InvalidArgument(format!(
            "cutoff {} on mode {mode} is below l + 2 = {needed}",
            basis.cutoff(mode)
        )));
    }
    check_alpha_guard(basis, mode, alpha)?;
    gksl(basis, None, &[code_jump(basis, mode, l, alpha)?])
}

/// `tr[(a^l − α^l) ρ (a^l − α^l)†]`, the distance of `ρ` from the code space.
pub fn code_distance(basis: &FockBasis, mode: usize, l: u32, alpha: C64, rho: &CMat) -> Result<f64> {
    let j = code_jump(basis, mode, l, alpha)?;
    let m = linalg::matmul(&linalg::matmul(j.matrix(), rho), &j.matrix().adjoint());
    Ok(linalg::trace(&m).re)
}

/// Even and odd cat states on `mode`.
pub fn cat_pair(basis: &FockBasis, mode: usize, alpha: C64) -> Result<(fock::Ket, fock::Ket)> {
    Ok((fock::cat_state(basis, mode, alpha, Parity::Plus)?, fock::cat_state(basis, mode, alpha, Parity::Minus)?))
}

/// `|C+⟩⟨C+| + |C−⟩⟨C−|`, rank 2.
pub fn cat_projector(basis: &FockBasis, mode: usize, alpha: C64) -> Result<Operator> {
    let (plus, minus) = cat_pair(basis, mode, alpha)?;
    let p = plus.projector() + minus.projector();
    let defect = linalg::max_abs(&(linalg::matmul(&p, &p) - &p));
    if defect > 1e-10 {
        return Err(Error::NotIdempotent { defect });
    }
    Operator::from_matrix(basis, p)
}

/// Logical flip `|C+⟩⟨C−| + |C−⟩⟨C+|`.
pub fn cat_logical_x(basis: &FockBasis, mode: usize, alpha: C64) -> Result<Operator> {
    let (plus, minus) = cat_pair(basis, mode, alpha)?;
    let (p, m) = (plus.amplitudes(), minus.amplitudes());
    Operator::from_matrix(basis, p * m.adjoint() + m * p.adjoint())
}

/// The two code-space targets of the Zeno gate driven by `H = a + a†`.
#[derive(Debug, Clone)]
pub struct GateTarget {
    /// `e^{−it(α+ᾱ)X} P`
    pub idealized: CMat,
    /// `e^{−it PHP} P`
    pub compressed: CMat,
    /// `PHP` computed by matrix products.
    pub compressed_hamiltonian: Operator,
    /// `2 ‖(idealized − compressed) P‖₂`, a trace-norm bound on the
    /// difference of the two channels on unit-trace inputs.
    pub discrepancy: f64,
    /// `⟨C−|PHP|C+⟩`
    pub coupling: C64,
}

impl GateTarget {
    pub fn apply_idealized(&self, x: &CMat) -> CMat {
        linalg::matmul(&linalg::matmul(&self.idealized, x), &self.idealized.adjoint())
    }

    pub fn apply_compressed(&self, x: &CMat) -> CMat {
        linalg::matmul(&linalg::matmul(&self.compressed, x), &self.compressed.adjoint())
    }
}

pub fn zeno_gate_target(basis: &FockBasis, mode: usize, alpha: C64, t: f64) -> Result<GateTarget> {
    if !t.is_finite() {
        return Err(Error::NonFinite("gate time"));
    }
    let p = cat_projector(basis, mode, alpha)?;
    let x = cat_logical_x(basis, mode, alpha)?;
    let a = fock::annihilation(basis, mode)?;
    let h = a.add(&a.dagger())?;
    let php = linalg::hermitian_part(&linalg::matmul(&linalg::matmul(p.matrix(), h.matrix()), p.matrix()));
    let compressed = linalg::matmul(&expm(&(&php * C64::new(0.0, -1.0)), t)?, p.matrix());
    let omega = 2.0 * alpha.re;
    let idealized = p.matrix() * C64::new((omega * t).cos(), 0.0) + x.matrix() * C64::new(0.0, -(omega * t).sin());
    let discrepancy = 2.0 * linalg::spectral_norm(&(&idealized - &compressed));
    let (plus, minus) = cat_pair(basis, mode, alpha)?;
    let coupling = (minus.amplitudes().adjoint() * &php * plus.amplitudes())[(0, 0)];
    Ok(GateTarget {
        idealized,
        compressed,
        compressed_hamiltonian: Operator::from_matrix(basis, php)?,
        discrepancy,
        coupling,
    })
}

/// Stationary state from the null vector of the generator restricted to the
/// block reachable from the identity, with the residual `‖L(ρ)‖₁`.
pub fn stationary_state(l: &Liouvillian) -> Result<(DensityOperator, f64)> {
    let basis = l.basis();
    let d = basis.total_dim();
    let indices = reachable_block(l, &linalg::identity(d));
    if indices.len() > STATIONARY_BLOCK_LIMIT {
        return Err(Error::DenseLimitExceeded { dim: indices.len(), limit: STATIONARY_BLOCK_LIMIT });
    }
    let g = block_generator(l, &indices, d);
    let svd = g.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::NonFinite("stationary state decomposition"))?;
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NonFinite("stationary state decomposition"))?;
    let mut x = CMat::zeros(d, d);
    {
        let slice = x.as_mut_slice();
        for (p, &idx) in indices.iter().enumerate() {
            slice[idx] = v_t[(k, p)].conj();
        }
    }
    let tr = linalg::trace(&x);
    if tr.norm() < 1e-300 {
        return Err(Error::InvalidArgument("stationary vector is traceless".into()));
    }
    let rho = linalg::hermitian_part(&(x / tr));
    let residual = trace_norm(&l.apply(&rho));
    Ok((DensityOperator::new(basis, rho)?, residual))
}
