//! Reference evolutions: exact semigroup steps `e^{tL}` and accurate
//! solutions of time-dependent master equations.
//!
//! A semigroup step picks the cheapest exact route:
//! - reversible generators use the Hilbert-space unitary `U = e^{−itH}`;
//! - otherwise the flattened generator is restricted to the coordinates
//!   reachable from the support of `x` and that block is exponentiated;
//! - blocks too large for a dense exponential fall back to Taylor stepping of
//!   the action `x ↦ L(x)`.

mod expm;
mod rk;
mod schedule;

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

pub use expm::expm;
pub use rk::dopri_evolve;
pub use schedule::{CustomFn, Modulation, Schedule, ScheduleTerm};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, I};
use crate::liouville::{DensityOperator, Liouvillian, SuperOperator, SuperOperatorMatrix, DEFAULT_DENSE_LIMIT};

/// Default accuracy of [`reference_evolution`] used as the time-dependent oracle.
pub const ORACLE_TOL: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPolicy {
    /// Largest Hilbert dimension whose full flattened generator may be built.
    pub dense_limit: usize,
    /// Largest reachable block exponentiated densely.
    pub block_limit: usize,
    /// Relative size of the last Taylor term kept.
    pub taylor_tol: f64,
    /// Accuracy of Runge-Kutta steps of time-dependent schedules.
    pub rk_tol: f64,
    /// Permits `t < 0` for dissipative generators.
    pub allow_negative_dissipative: bool,
}

impl Default for PropagationPolicy {
    fn default() -> Self {
        Self {
            dense_limit: DEFAULT_DENSE_LIMIT,
            block_limit: 640,
            taylor_tol: 1e-14,
            rk_tol: 1e-12,
            allow_negative_dissipative: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Unitary { generator: u64, t: u64 },
    Block { generator: u64, t: u64, support: u64 },
}

#[derive(Debug)]
struct BlockExp {
    indices: Vec<usize>,
    exp: CMat,
}

#[derive(Debug)]
enum CachedStep {
    Unitary(CMat),
    Block(BlockExp),
}

/// Memoized step exponentials keyed by generator fingerprint, step size and
/// the reachable block.
#[derive(Debug, Default)]
pub struct PropagatorCache {
    entries: RwLock<HashMap<CacheKey, Arc<CachedStep>>>,
    capacity: usize,
}

impl PropagatorCache {
    pub fn with_capacity(capacity: usize) -> Self {
        Self { entries: RwLock::new(HashMap::new()), capacity }
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.entries.write().expect("cache lock").clear();
    }

    fn get_or_insert(&self, key: CacheKey, make: impl FnOnce() -> Result<CachedStep>) -> Result<Arc<CachedStep>> {
        if self.capacity == 0 {
            return Ok(Arc::new(make()?));
        }
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let value = Arc::new(make()?);
        let mut map = self.entries.write().expect("cache lock");
        if map.len() < self.capacity {
            map.entry(key).or_insert_with(|| value.clone());
        }
        Ok(value)
    }
}

/// Exact propagation of autonomous generators with an optional cache.
#[derive(Debug)]
pub struct Propagator {
    policy: PropagationPolicy,
    cache: PropagatorCache,
}

impl Default for Propagator {
    fn default() -> Self {
        Self::new(PropagationPolicy::default())
    }
}

/// Shared default propagator (cached).
pub fn default_propagator() -> &'static Propagator {
    static DEFAULT: OnceLock<Propagator> = OnceLock::new();
    DEFAULT.get_or_init(Propagator::default)
}

impl Propagator {
    pub fn new(policy: PropagationPolicy) -> Self {
        Self { policy, cache: PropagatorCache::with_capacity(512) }
    }

    pub fn uncached(policy: PropagationPolicy) -> Self {
        Self { policy, cache: PropagatorCache::with_capacity(0) }
    }

    pub fn policy(&self) -> &PropagationPolicy {
        &self.policy
    }

    pub fn cache(&self) -> &PropagatorCache {
        &self.cache
    }

    /// `e^{tL}(x)` on raw matrices.
    pub fn step(&self, l: &Liouvillian, t: f64, x: &CMat) -> Result<CMat> {
        if !t.is_finite() {
            return Err(Error::NonFinite("step time"));
        }
        if t == 0.0 || l.is_zero() {
            return Ok(x.clone());
        }
        if t < 0.0 && !l.is_pure_commutator() && !self.policy.allow_negative_dissipative {
            return Err(Error::NegativeTimeDissipative { t });
        }
        if l.is_pure_commutator() {
            let h = l.hamiltonian_matrix().expect("non-zero commutator has a Hamiltonian");
            let key = CacheKey::Unitary { generator: l.fingerprint(), t: t.to_bits() };
            let cached = self.cache.get_or_insert(key, || Ok(CachedStep::Unitary(expm(&(h * -I), t)?)))?;
            let CachedStep::Unitary(u) = cached.as_ref() else { unreachable!("unitary key holds a unitary") };
            return Ok(linalg::matmul(&linalg::matmul(u, x), &u.adjoint()));
        }
        let d = x.nrows();
        let indices = reachable_block(l, x);
        if indices.len() <= self.policy.block_limit {
            let mut hasher = DefaultHasher::new();
            indices.hash(&mut hasher);
            let key = CacheKey::Block { generator: l.fingerprint(), t: t.to_bits(), support: hasher.finish() };
            let cached = self.cache.get_or_insert(key, || {
                let g = block_generator(l, &indices, d);
                Ok(CachedStep::Block(BlockExp { exp: expm(&g, t)?, indices: indices.clone() }))
            })?;
            let CachedStep::Block(block) = cached.as_ref() else { unreachable!("block key holds a block") };
            let flat = x.as_slice();
            let v = CVec::from_iterator(block.indices.len(), block.indices.iter().map(|&k| flat[k]));
            let w = &block.exp * v;
            let mut out = CMat::zeros(d, d);
            let slice = out.as_mut_slice();
            for (&k, z) in block.indices.iter().zip(w.iter()) {
                slice[k] = *z;
            }
            return Ok(out);
        }
        taylor_action(|y| l.apply(y), l.norm_bound(), t, x, self.policy.taylor_tol)
    }

    /// Flattened `e^{tL}`; requires the dense limit.
    pub fn step_superop(&self, l: &Liouvillian, t: f64) -> Result<SuperOperatorMatrix> {
        if t < 0.0 && !l.is_pure_commutator() && !self.policy.allow_negative_dissipative {
            return Err(Error::NegativeTimeDissipative { t });
        }
        let flat = crate::liouville::flatten_with_limit(l, self.policy.dense_limit)?;
        SuperOperatorMatrix::new(l.hilbert_dim(), expm(flat.matrix(), t)?)
    }

    /// `e^{tS}(x)` for any superoperator: dense for small `D`, Taylor otherwise.
    pub fn evolve_superop(&self, op: &dyn SuperOperator, t: f64, x: &CMat) -> Result<CMat> {
        if t == 0.0 {
            return Ok(x.clone());
        }
        let d = op.hilbert_dim();
        if d * d <= self.policy.block_limit.min(256) {
            let e = expm(&op.to_matrix(), t)?;
            return Ok(linalg::unvec(&(e * linalg::vec_of(x)), d));
        }
        taylor_action(|y| op.apply(y), op.norm_bound(), t, x, self.policy.taylor_tol)
    }

    /// Evolution-system step `U(t, s)` of a schedule by Runge-Kutta at the
    /// policy's tolerance.
    pub fn schedule_step(&self, s: &Schedule, t0: f64, t1: f64, x: &CMat) -> Result<CMat> {
        rk_schedule(s, t0, t1, x, self.policy.rk_tol)
    }
}

/// Coordinates (column-stacked indices) reachable from the support of `x`
/// under repeated application of `L`, sorted.
pub(crate) fn reachable_block(l: &Liouvillian, x: &CMat) -> Vec<usize> {
    let d = x.nrows();
    let col_support = |m: &CMat| -> Vec<Vec<usize>> {
        (0..d).map(|c| (0..d).filter(|&r| m[(r, c)] != C64::new(0.0, 0.0)).collect()).collect()
    };
    let row_support = |m: &CMat| -> Vec<Vec<usize>> {
        (0..d).map(|r| (0..d).filter(|&c| m[(r, c)] != C64::new(0.0, 0.0)).collect()).collect()
    };
    // one-sided moves come from H and every L†L
    let mut one_sided = Vec::new();
    if let Some(h) = l.hamiltonian_matrix() {
        one_sided.push(h.clone());
    }
    for j in l.jump_matrices() {
        one_sided.push(linalg::matmul(&j.adjoint(), j));
    }
    let mut left: Vec<Vec<usize>> = vec![Vec::new(); d];
    let mut right: Vec<Vec<usize>> = vec![Vec::new(); d];
    for m in &one_sided {
        for (acc, s) in left.iter_mut().zip(col_support(m)) {
            acc.extend(s);
        }
        for (acc, s) in right.iter_mut().zip(row_support(m)) {
            acc.extend(s);
        }
    }
    for v in left.iter_mut().chain(right.iter_mut()) {
        v.sort_unstable();
        v.dedup();
    }
    let sandwich: Vec<Vec<Vec<usize>>> = l.jump_matrices().map(col_support).collect();

    let mut seen = vec![false; d * d];
    let mut queue = Vec::new();
    for (k, z) in x.as_slice().iter().enumerate() {
        if *z != C64::new(0.0, 0.0) {
            seen[k] = true;
            queue.push(k);
        }
    }
    while let Some(k) = queue.pop() {
        let (r, c) = (k % d, k / d);
        let mut visit = |i: usize, j: usize| {
            let idx = j * d + i;
            if !seen[idx] {
                seen[idx] = true;
                queue.push(idx);
            }
        };
        for &i in &left[r] {
            visit(i, c);
        }
        for &j in &right[c] {
            visit(r, j);
        }
        for supp in &sandwich {
            for &i in &supp[r] {
                for &j in &supp[c] {
                    visit(i, j);
                }
            }
        }
    }
    (0..d * d).filter(|&k| seen[k]).collect()
}

/// The flattened generator restricted to `indices` (closed under `L`).
pub(crate) fn block_generator(l: &Liouvillian, indices: &[usize], d: usize) -> CMat {
    let m = indices.len();
    let mut pos = vec![usize::MAX; d * d];
    for (p, &k) in indices.iter().enumerate() {
        pos[k] = p;
    }
    let mut g = CMat::zeros(m, m);
    let half = C64::new(0.5, 0.0);
    let mut one_sided: Vec<(CMat, C64)> = Vec::new();
    if let Some(h) = l.hamiltonian_matrix() {
        one_sided.push((h.clone(), -I));
    }
    for j in l.jump_matrices() {
        one_sided.push((linalg::matmul(&j.adjoint(), j), -half));
    }
    let jumps: Vec<&CMat> = l.jump_matrices().collect();
    for (col, &k) in indices.iter().enumerate() {
        let (r, c) = (k % d, k / d);
        let mut add = |i: usize, j: usize, v: C64| {
            let p = pos[j * d + i];
            debug_assert!(p != usize::MAX, "reachable block is closed");
            g[(p, col)] += v;
        };
        for (m_op, coeff) in &one_sided {
            // coeff·(M x) and conj-side term: −i(Hx − xH), −½(Kx + xK)
            let right_sign = if *coeff == -I { I } else { *coeff };
            for i in 0..d {
                let v = m_op[(i, r)];
                if v != C64::new(0.0, 0.0) {
                    add(i, c, *coeff * v);
                }
            }
            for j in 0..d {
                let v = m_op[(c, j)];
                if v != C64::new(0.0, 0.0) {
                    add(r, j, right_sign * v);
                }
            }
        }
        for op in &jumps {
            for i in 0..d {
                let a = op[(i, r)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..d {
                    let b = op[(j, c)];
                    if b != C64::new(0.0, 0.0) {
                        add(i, j, a * b.conj());
                    }
                }
            }
        }
    }
    g
}

/// Taylor stepping of `e^{tS}(x)` with substeps of size `h ≤ 1/‖S‖`.
fn taylor_action<F: Fn(&CMat) -> CMat>(apply: F, norm_bound: f64, t: f64, x: &CMat, tol: f64) -> Result<CMat> {
    let steps = (t.abs() * norm_bound).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    let mut y = x.clone();
    for _ in 0..steps {
        let mut term = y.clone();
        let mut sum = y.clone();
        let mut small = 0;
        for k in 1..=200 {
            term = apply(&term) * C64::new(h / k as f64, 0.0);
            sum += &term;
            if term.norm() <= tol * sum.norm().max(f64::MIN_POSITIVE) {
                small += 1;
                if small == 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
        if !linalg::is_finite(&sum) {
            return Err(Error::NonFinite("Taylor propagation"));
        }
        y = sum;
    }
    Ok(y)
}

fn rk_schedule(s: &Schedule, t0: f64, t1: f64, x: &CMat, tol: f64) -> Result<CMat> {
    s.check_window(t0, t1)?;
    if t1 == t0 || s.terms().is_empty() {
        return Ok(x.clone());
    }
    let nb = s.norm_bound_at(0.5 * (t0 + t1)).max(s.norm_bound_at(t0));
    let h0 = if nb > 0.0 { (0.5 / nb).min(t1 - t0) } else { t1 - t0 };
    dopri_evolve(|t, y| s.apply_at(t, y), t0, t1, x, tol, Some(h0))
}

/// `e^{tL}(x)` with the shared default propagator.
pub fn semigroup_step(l: &Liouvillian, t: f64, x: &DensityOperator) -> Result<DensityOperator> {
    check_state_basis(l.basis(), x)?;
    let out = default_propagator().step(l, t, x.matrix())?;
    Ok(DensityOperator::from_raw(x.basis(), out))
}

fn check_state_basis(basis: &crate::fock::FockBasis, x: &DensityOperator) -> Result<()> {
    if basis != x.basis() {
        return Err(Error::BasisMismatch);
    }
    Ok(())
}

/// Solves `dx/dt = L_t(x)` from `t_start` to `t_end` with trace-norm target
/// `tol` (at least `1e−13`).
pub fn reference_evolution(s: &Schedule, t_start: f64, t_end: f64, x: &DensityOperator, tol: f64) -> Result<DensityOperator> {
    if !(tol >= 1e-13) {
        return Err(Error::InvalidArgument(format!("reference tolerance {tol} below 1e-13")));
    }
    check_state_basis(s.basis(), x)?;
    let out = rk_schedule(s, t_start, t_end, x.matrix(), tol)?;
    Ok(DensityOperator::from_raw(x.basis(), out))
}

/// The two-parameter evolution system `U(t, s0)` applied to `x`.
pub fn evolution_system_step(s: &Schedule, t: f64, s0: f64, x: &DensityOperator) -> Result<DensityOperator> {
    reference_evolution(s, s0, t, x, ORACLE_TOL)
}
