//! Norms, convergence-order fits and the diagnostic inequalities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};
use crate::liouville::{DensityOperator, Liouvillian, ProjectorSuperOp, SuperOperator, SuperOperatorMatrix};
use crate::propagators::{dopri_evolve, expm, Propagator, Schedule};

/// `‖x‖₁`: absolute eigenvalues for Hermitian input, singular values otherwise.
pub fn trace_norm(x: &CMat) -> f64 {
    if linalg::hermiticity_defect(x) <= 1e-10 * linalg::max_abs(x).max(1.0) {
        linalg::eigvalsh(x).iter().map(|v| v.abs()).sum()
    } else {
        singular_trace_norm(x)
    }
}

/// `‖x‖₁` as the sum of singular values (valid for every matrix).
pub fn singular_trace_norm(x: &CMat) -> f64 {
    linalg::singular_values(x).iter().sum()
}

pub fn try_trace_norm(x: &CMat) -> Result<f64> {
    if !linalg::is_finite(x) {
        return Err(Error::NonFinite("trace norm input"));
    }
    Ok(trace_norm(x))
}

/// Two-sided weight `Π_j (1 + N_j)^{k_j/4}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SobolevWeight {
    basis: FockBasis,
    k: Vec<f64>,
    #[serde(skip)]
    diag: Vec<f64>,
}

impl SobolevWeight {
    pub fn new(basis: &FockBasis, k: Vec<f64>) -> Result<Self> {
        if k.len() != basis.modes() {
            return Err(Error::DimensionMismatch { expected: basis.modes(), found: k.len() });
        }
        if k.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument("Sobolev exponents must be finite and ≥ 0".into()));
        }
        let diag = (0..basis.total_dim())
            .map(|i| {
                let occ = basis.multi_index(i);
                occ.iter().zip(&k).map(|(&n, &kj)| (1.0 + n as f64).powf(kj / 4.0)).product()
            })
            .collect();
        Ok(Self { basis: basis.clone(), k, diag })
    }

    /// The same exponent on every mode.
    pub fn uniform(basis: &FockBasis, k: f64) -> Result<Self> {
        Self::new(basis, vec![k; basis.modes()])
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn exponents(&self) -> &[f64] {
        &self.k
    }

    /// Diagonal of the two-sided weight.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `Π (1+N_j)^{k_j/2}`, the weight seen by `tr[W x]`.
    pub fn trace_weight(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.diag.len(), self.diag.iter().map(|w| C64::new(w * w, 0.0))))
    }

    /// `W x W`.
    pub fn weigh(&self, x: &CMat) -> CMat {
        CMat::from_fn(x.nrows(), x.ncols(), |r, c| x[(r, c)] * (self.diag[r] * self.diag[c]))
    }
}

/// `‖W x W‖₁`.
pub fn sobolev_norm(x: &CMat, w: &SobolevWeight) -> Result<f64> {
    if x.nrows() != w.basis.total_dim() || x.ncols() != x.nrows() {
        return Err(Error::BasisMismatch);
    }
    Ok(trace_norm(&w.weigh(x)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormPair {
    /// Hilbert-Schmidt to Hilbert-Schmidt.
    TwoToTwo,
    /// Trace norm to trace norm.
    OneToOne,
}

/// An interval known to contain an induced norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
}

/// Induced norm of a flattened superoperator. The 2→2 norm is exact. The
/// 1→1 norm over Hermitian inputs is bracketed: the lower bound is the value
/// reached by alternating ascent over pure states `|ψ⟩⟨ψ|` (the extreme
/// points of the Hermitian trace-norm ball), the upper bound is `√D ‖M‖₂`.
pub fn flattened_operator_norm(m: &SuperOperatorMatrix, pair: NormPair) -> Result<NormEstimate> {
    let two = linalg::spectral_norm(m.matrix());
    match pair {
        NormPair::TwoToTwo => Ok(NormEstimate { lower: two, upper: two }),
        NormPair::OneToOne => {
            let d = m.hilbert_dim();
            let upper = (d as f64).sqrt() * two;
            let lower = one_to_one_ascent(m, 4, 60).min(upper);
            Ok(NormEstimate { lower, upper })
        }
    }
}

fn one_to_one_ascent(m: &SuperOperatorMatrix, random_restarts: usize, iterations: usize) -> f64 {
    let d = m.hilbert_dim();
    let value = |psi: &CVec| -> f64 {
        let x = psi * psi.adjoint();
        trace_norm(&m.apply(&x))
    };
    let mut starts: Vec<CVec> = (0..d)
        .map(|k| {
            let mut v = CVec::zeros(d);
            v[k] = ONE;
            v
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..random_restarts {
        let g = linalg::random_gaussian(d, 1, &mut rng);
        let v = CVec::from_column_slice(g.as_slice());
        let n = v.norm();
        starts.push(v / C64::new(n, 0.0));
    }
    let mut best = 0.0f64;
    for start in starts {
        let mut psi = start;
        let mut current = value(&psi);
        for _ in 0..iterations {
            let y = m.apply(&(&psi * psi.adjoint()));
            let sign = sign_operator(&y);
            let g = m.apply_adjoint(&sign);
            let (_, vecs) = linalg::eigh(&g);
            let next = vecs.column(d - 1).into_owned();
            let v = value(&next);
            if v <= current * (1.0 + 1e-13) {
                current = current.max(v);
                break;
            }
            psi = next;
            current = v;
        }
        best = best.max(current);
    }
    best
}

/// Unitary polar factor of `y` (the sign for Hermitian `y`).
fn sign_operator(y: &CMat) -> CMat {
    let svd = y.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    linalg::matmul(&u, &vt)
}

/// Result of a log-log order fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub oracle_tol: f64,
    /// Errors below `100 · oracle_tol`, left out of the fit.
    pub saturated: Vec<bool>,
    /// Errors that are exactly zero, left out of the fit.
    pub exact: Vec<bool>,
    pub drift: Vec<DriftDiagnostics>,
}

/// Least-squares `(slope, intercept, R²)` of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

/// Fits `ln(error) = intercept + slope · ln(n)`.
pub fn fit_order(n_values: &[f64], errors: &[f64], oracle_tol: f64) -> Result<ConvergenceReport> {
    if n_values.len() != errors.len() {
        return Err(Error::DimensionMismatch { expected: n_values.len(), found: errors.len() });
    }
    if n_values.iter().chain(errors).any(|v| !v.is_finite()) || n_values.iter().any(|&n| n <= 0.0) {
        return Err(Error::NonFinite("order fit input"));
    }
    let exact: Vec<bool> = errors.iter().map(|&e| e == 0.0).collect();
    let saturated: Vec<bool> = errors.iter().map(|&e| e != 0.0 && e < 100.0 * oracle_tol).collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = n_values
        .iter()
        .zip(errors)
        .zip(exact.iter().zip(&saturated))
        .filter(|(_, (&ex, &sat))| !ex && !sat)
        .map(|((&n, &e), _)| (n.ln(), e.abs().ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientPoints { usable: xs.len() });
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(ConvergenceReport {
        n_values: n_values.to_vec(),
        errors: errors.to_vec(),
        slope,
        intercept,
        r_squared,
        oracle_tol,
        saturated,
        exact,
        drift: Vec::new(),
    })
}

/// Fits `ln v(t) = c − rate · t`; returns `(rate, c, R²)`.
pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<(f64, f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
    }
    let pts: Vec<(f64, f64)> =
        times.iter().zip(values).filter(|(_, &v)| v > 0.0 && v.is_finite()).map(|(&t, &v)| (t, v.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { usable: pts.len() });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let (slope, intercept, r2) = linear_fit(&x, &y);
    Ok((-slope, intercept, r2))
}

/// Largest sampled ratio `‖L(x)‖₁ / ‖x‖_{W^{k,1}}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelativeBoundEstimate {
    pub ratio: f64,
    pub samples: usize,
    pub matrix_units: usize,
    pub level_budget: usize,
    pub description: String,
}

/// Lower estimate of the relative-boundedness constant of `L` against the
/// weight: maximum over `samples` seeded Gaussian Hermitian inputs and all
/// matrix units `|r⟩⟨c|` whose levels stay below `level_budget`.
pub fn relative_bound_diagnostic(
    l: &dyn SuperOperator,
    w: &SobolevWeight,
    samples: usize,
    level_budget: usize,
    seed: u64,
) -> Result<RelativeBoundEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("relative bound needs at least one sample".into()));
    }
    let d = l.hilbert_dim();
    if d != w.basis.total_dim() {
        return Err(Error::BasisMismatch);
    }
    let ratio = |x: &CMat| -> f64 {
        let den = trace_norm(&w.weigh(x));
        if den == 0.0 {
            0.0
        } else {
            trace_norm(&l.apply(x)) / den
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..samples {
        best = best.max(ratio(&linalg::random_hermitian(d, &mut rng)));
    }
    let within: Vec<usize> =
        (0..d).filter(|&i| w.basis.multi_index(i).iter().all(|&n| n < level_budget)).collect();
    let mut unit = CMat::zeros(d, d);
    for &r in &within {
        for &c in &within {
            unit[(r, c)] = ONE;
            best = best.max(ratio(&unit));
            unit[(r, c)] = ZERO;
        }
    }
    let units = within.len() * within.len();
    Ok(RelativeBoundEstimate {
        ratio: best,
        samples,
        matrix_units: units,
        level_budget,
        description: format!(
            "max of ‖L(x)‖₁/‖x‖_W over {samples} Gaussian Hermitian samples (seed {seed}) and {units} matrix units below level {level_budget}"
        ),
    })
}

/// Matrix-unit states supported on admissible levels: every `|n⟩⟨n|` and
/// `(|n⟩ + e^{iφ}|m⟩)(⟨n| + e^{−iφ}⟨m|)/2` for `φ ∈ {0, π/2, π, 3π/2}`.
pub fn admissible_states(basis: &FockBasis, margin: &[usize]) -> Vec<CMat> {
    let d = basis.total_dim();
    let levels = admissible_indices(basis, margin);
    let mut out = Vec::new();
    for &n in &levels {
        let mut x = CMat::zeros(d, d);
        x[(n, n)] = ONE;
        out.push(x);
    }
    let phases = [ONE, C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)];
    for (a, &n) in levels.iter().enumerate() {
        for &m in &levels[a + 1..] {
            for ph in phases {
                let mut x = CMat::zeros(d, d);
                x[(n, n)] = C64::new(0.5, 0.0);
                x[(m, m)] = C64::new(0.5, 0.0);
                x[(m, n)] = ph * 0.5;
                x[(n, m)] = ph.conj() * 0.5;
                out.push(x);
            }
        }
    }
    out
}

/// Flat indices whose level in every mode is below `cutoff − margin`.
pub fn admissible_indices(basis: &FockBasis, margin: &[usize]) -> Vec<usize> {
    (0..basis.total_dim())
        .filter(|&i| {
            basis
                .multi_index(i)
                .iter()
                .zip(basis.cutoffs())
                .zip(margin)
                .all(|((&n, &cut), &m)| n + m < cut)
        })
        .collect()
}

fn check_admissible(basis: &FockBasis, margin: &[usize], x: &CMat) -> Result<()> {
    let scale = linalg::max_abs(x).max(1e-300);
    let d = basis.total_dim();
    for i in 0..d {
        let occ = basis.multi_index(i);
        for (mode, (&n, (&cut, &m))) in occ.iter().zip(basis.cutoffs().iter().zip(margin)).enumerate() {
            if n + m >= cut {
                let row = (0..d).any(|j| x[(i, j)].norm() > 1e-14 * scale || x[(j, i)].norm() > 1e-14 * scale);
                if row {
                    return Err(Error::SupportViolation { mode, level: n, max_level: cut - m - 1 });
                }
            }
        }
    }
    Ok(())
}

fn check_psd(x: &CMat) -> Result<()> {
    let defect = linalg::hermiticity_defect(x);
    if defect > 1e-10 {
        return Err(Error::NotHermitian { defect });
    }
    let min_eig = linalg::eigvalsh(x)[0];
    if min_eig < -1e-10 {
        return Err(Error::NotPositive { min_eig });
    }
    Ok(())
}

/// `tr[W L(x)] − ω tr[W x]` per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentStabilityReport {
    pub omega: f64,
    pub omega_fitted: bool,
    pub margins: Vec<f64>,
    pub max_margin: f64,
}

/// Checks `tr[W L(x)] ≤ ω tr[W x]` with `W = Π(1+N_j)^{k_j/2}`. When `omega`
/// is `None` it is fitted as the largest ratio over the states. States must
/// be positive and supported below `cutoff − degree margin` of `L`.
pub fn moment_stability_check(
    l: &Liouvillian,
    w: &SobolevWeight,
    states: &[CMat],
    omega: Option<f64>,
) -> Result<MomentStabilityReport> {
    let margin = l.degree_margin();
    let heis = l.apply_adjoint(&w.trace_weight());
    let tw = w.trace_weight();
    let mut pairs = Vec::with_capacity(states.len());
    for x in states {
        check_psd(x)?;
        check_admissible(l.basis(), &margin, x)?;
        pairs.push((pairing(&heis, x), pairing(&tw, x)));
    }
    let fitted = omega.is_none();
    let omega = omega.unwrap_or_else(|| {
        pairs.iter().filter(|(_, b)| *b > 0.0).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max).max(0.0)
    });
    let margins: Vec<f64> = pairs.iter().map(|(a, b)| a - omega * b).collect();
    let max_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MomentStabilityReport { omega, omega_fitted: fitted, margins, max_margin })
}

/// Real part of `tr[g x]`.
fn pairing(g: &CMat, x: &CMat) -> f64 {
    let d = g.nrows();
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += (g[(i, j)] * x[(j, i)]).re;
        }
    }
    acc
}

/// Drift form `tr[W L(x)] ≤ −damping · tr[V x] + c` with `V` the trace
/// weight of `damping_weight`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub damping: f64,
    /// `tr[W L(x)] + damping · tr[V x]` per state.
    pub margins: Vec<f64>,
    /// Fitted `c`: the largest margin.
    pub c: f64,
    /// Largest eigenvalue of `L†(W) + damping · V` on the admissible block;
    /// bounds the margin of every admissible state.
    pub c_operator: f64,
}

pub fn drift_inequality_check(
    l: &Liouvillian,
    w: &SobolevWeight,
    damping: f64,
    damping_weight: &SobolevWeight,
    states: &[CMat],
) -> Result<DriftReport> {
    let margin = l.degree_margin();
    let g = drift_operator(l, w, damping, damping_weight);
    let mut margins = Vec::with_capacity(states.len());
    for x in states {
        check_psd(x)?;
        check_admissible(l.basis(), &margin, x)?;
        margins.push(pairing(&g, x));
    }
    let c = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c_operator = drift_constant_operator_bound(l, w, damping, damping_weight);
    Ok(DriftReport { damping, margins, c, c_operator })
}

fn drift_operator(l: &Liouvillian, w: &SobolevWeight, damping: f64, damping_weight: &SobolevWeight) -> CMat {
    l.apply_adjoint(&w.trace_weight()) + damping_weight.trace_weight() * C64::new(damping, 0.0)
}

/// `λ_max` of `L†(W) + damping · V` compressed to the admissible levels.
pub fn drift_constant_operator_bound(l: &Liouvillian, w: &SobolevWeight, damping: f64, damping_weight: &SobolevWeight) -> f64 {
    let g = drift_operator(l, w, damping, damping_weight);
    let idx = admissible_indices(l.basis(), &l.degree_margin());
    let block = CMat::from_fn(idx.len(), idx.len(), |r, c| g[(idx[r], idx[c])]);
    linalg::eigvalsh(&block).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Off-corner block norms of the evolution between two times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoConditionSample {
    pub t: f64,
    pub s: f64,
    /// `‖P V(t,s) (1−P)‖` in the flattened 2→2 norm.
    pub into_code: f64,
    /// `‖(1−P) V(t,s) P‖`.
    pub out_of_code: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZenoConditionReport {
    pub b: f64,
    pub samples: Vec<ZenoConditionSample>,
}

/// Estimates `b` in `‖P V(t,s)(1−P)‖, ‖(1−P)V(t,s)P‖ ≤ (t−s) b` over all
/// pairs `t > s` of the time grid.
pub fn zeno_condition_check(p: &ProjectorSuperOp, v: &Schedule, times: &[f64]) -> Result<ZenoConditionReport> {
    let mut pairs = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for &s in &times[..i] {
            if t > s {
                pairs.push((t, s));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("Zeno condition grid needs two distinct times".into()));
    }
    let d = p.hilbert_dim();
    let mut samples = Vec::with_capacity(pairs.len());
    let mut b = 0.0f64;
    for (t, s) in pairs {
        v.check_window(s, t)?;
        let (into_code, out_of_code) = if v.is_reversible() {
            let u = schedule_unitary(v, s, t)?;
            let fwd = |x: &CMat| linalg::matmul(&linalg::matmul(&u, x), &u.adjoint());
            let bwd = |y: &CMat| linalg::matmul(&linalg::matmul(&u.adjoint(), y), &u);
            let into = block_norm(d, |x| p.apply(&fwd(&p.complement(x))), |y| p.complement(&bwd(&p.apply_adjoint(y))));
            let out = block_norm(d, |x| p.complement(&fwd(&p.apply(x))), |y| p.apply_adjoint(&bwd(&p.complement(y))));
            (into, out)
        } else {
            let vm = flattened_schedule_step(v, s, t)?;
            let pm = p.to_matrix();
            let qm = linalg::identity(d * d) - &pm;
            let into = linalg::spectral_norm(&linalg::matmul(&linalg::matmul(&pm, &vm), &qm));
            let out = linalg::spectral_norm(&linalg::matmul(&linalg::matmul(&qm, &vm), &pm));
            (into, out)
        };
        b = b.max(into_code.max(out_of_code) / (t - s));
        samples.push(ZenoConditionSample { t, s, into_code, out_of_code });
    }
    Ok(ZenoConditionReport { b, samples })
}

/// Hilbert-space propagator of a reversible schedule from `s` to `t`.
pub fn schedule_unitary(v: &Schedule, s: f64, t: f64) -> Result<CMat> {
    let d = v.basis().total_dim();
    if v.is_autonomous() {
        let h = v.generator_at(s)?.hamiltonian().map(|h| h.into_matrix()).unwrap_or_else(|| CMat::zeros(d, d));
        return expm(&(h * C64::new(0.0, -1.0)), t - s);
    }
    let rhs = |tau: f64, u: &CMat| -> CMat {
        let h = v
            .generator_at(tau)
            .ok()
            .and_then(|g| g.hamiltonian())
            .map(|h| h.into_matrix())
            .unwrap_or_else(|| CMat::zeros(d, d));
        linalg::matmul(&h, u) * C64::new(0.0, -1.0)
    };
    dopri_evolve(rhs, s, t, &linalg::identity(d), 1e-12, None)
}

fn flattened_schedule_step(v: &Schedule, s: f64, t: f64) -> Result<CMat> {
    let d = v.basis().total_dim();
    let limit = crate::liouville::DEFAULT_DENSE_LIMIT.min(16);
    if d > limit {
        return Err(Error::DenseLimitExceeded { dim: d * d, limit: limit * limit });
    }
    if v.is_autonomous() {
        let l = v.generator_at(s)?;
        return Ok(Propagator::default().step_superop(&l, t - s)?.into_matrix());
    }
    let mut out = CMat::zeros(d * d, d * d);
    let mut unit = CMat::zeros(d, d);
    let p = Propagator::default();
    for c in 0..d {
        for r in 0..d {
            unit[(r, c)] = ONE;
            let y = p.schedule_step(v, s, t, &unit)?;
            out.column_mut(c * d + r).copy_from_slice(y.as_slice());
            unit[(r, c)] = ZERO;
        }
    }
    Ok(out)
}

/// Largest singular value of a superoperator given by its action and
/// adjoint action, by power iteration on `A†A` from a seeded start.
fn block_norm(d: usize, apply: impl Fn(&CMat) -> CMat, adjoint: impl Fn(&CMat) -> CMat) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0xb10c);
    let mut x = linalg::random_gaussian(d, d, &mut rng);
    let mut sigma = 0.0;
    for _ in 0..500 {
        let n = x.norm();
        if n == 0.0 {
            return 0.0;
        }
        x /= C64::new(n, 0.0);
        let y = apply(&x);
        let new_sigma = y.norm();
        x = adjoint(&y);
        if (new_sigma - sigma).abs() <= 1e-12 * new_sigma.max(1e-300) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

/// Truncation and positivity diagnostics of a propagated state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDiagnostics {
    /// `|tr x − 1|`.
    pub trace_drift: f64,
    pub min_eig: f64,
    /// Population on the top two levels of each mode.
    pub top_level_mass: Vec<f64>,
}

impl DriftDiagnostics {
    pub fn max_top_level_mass(&self) -> f64 {
        self.top_level_mass.iter().copied().fold(0.0, f64::max)
    }
}

pub fn drift_diagnostics(x: &DensityOperator) -> DriftDiagnostics {
    drift_diagnostics_raw(x.basis(), x.matrix())
}

pub fn drift_diagnostics_raw(basis: &FockBasis, x: &CMat) -> DriftDiagnostics {
    let trace_drift = (x.trace() - ONE).norm();
    let min_eig = linalg::eigvalsh(x).first().copied().unwrap_or(0.0);
    let top_level_mass = (0..basis.modes())
        .map(|mode| {
            let cut = basis.cutoffs()[mode];
            (0..basis.total_dim())
                .filter(|&i| basis.level(i, mode) + 2 >= cut)
                .map(|i| x[(i, i)].re)
                .sum()
        })
        .collect();
    DriftDiagnostics { trace_drift, min_eig, top_level_mass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, number_operator, Operator};
    use crate::liouville::{commutator_generator, flatten, Liouvillian, ProjectorSuperOp};
    use proptest::prelude::*;

    fn diag(v: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(v.len(), v.iter().map(|&a| C64::new(a, 0.0))))
    }

    #[test]
    fn trace_norm_basic_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = linalg::random_density(6, &mut rng);
        assert!((trace_norm(&rho) - 1.0).abs() < 1e-13);
        assert!((trace_norm(&diag(&[1.0, -1.0])) - 2.0).abs() < 1e-15);
        for _ in 0..10 {
            let h = linalg::random_hermitian(9, &mut rng);
            assert!((trace_norm(&h) - singular_trace_norm(&h)).abs() < 1e-11);
        }
        let mut bad = diag(&[1.0, 0.0]);
        bad[(0, 1)] = C64::new(f64::NAN, 0.0);
        assert!(try_trace_norm(&bad).is_err());
    }

    #[test]
    fn sobolev_cases() {
        let b = FockBasis::single_mode(5).unwrap();
        let w0 = SobolevWeight::uniform(&b, 0.0).unwrap();
        let w4 = SobolevWeight::uniform(&b, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = linalg::random_hermitian(5, &mut rng);
        assert!((sobolev_norm(&x, &w0).unwrap() - trace_norm(&x)).abs() < 1e-14);
        let vac = DensityOperator::fock(&b, &[0]).unwrap();
        for k in [0.0, 1.0, 4.0, 7.5] {
            let w = SobolevWeight::uniform(&b, k).unwrap();
            assert!((sobolev_norm(vac.matrix(), &w).unwrap() - 1.0).abs() < 1e-15);
        }
        let one = DensityOperator::fock(&b, &[1]).unwrap();
        assert!((sobolev_norm(one.matrix(), &w4).unwrap() - 4.0).abs() < 1e-14);
        assert!(SobolevWeight::uniform(&b, -1.0).is_err());
        let other = FockBasis::single_mode(4).unwrap();
        assert!(sobolev_norm(&CMat::zeros(4, 4), &SobolevWeight::uniform(&other, 1.0).unwrap()).is_ok());
        assert!(sobolev_norm(&x, &SobolevWeight::uniform(&other, 1.0).unwrap()).is_err());
    }

    #[test]
    fn operator_norm_examples() {
        let b = FockBasis::single_mode(3).unwrap();
        let id = SuperOperatorMatrix::identity(3);
        for pair in [NormPair::TwoToTwo, NormPair::OneToOne] {
            let e = flattened_operator_norm(&id, pair).unwrap();
            assert!((e.lower - 1.0).abs() < 1e-12, "{pair:?}");
            let scaled = SuperOperatorMatrix::new(3, id.matrix() * C64::new(0.3, 0.0)).unwrap();
            let e = flattened_operator_norm(&scaled, pair).unwrap();
            assert!((e.lower - 0.3).abs() < 1e-12);
            assert!(e.upper >= e.lower);
        }
        let mut p = CMat::zeros(3, 3);
        p[(1, 1)] = ONE;
        let ps = ProjectorSuperOp::new(&Operator::from_matrix(&b, p).unwrap()).unwrap();
        let m = flatten(&ps).unwrap();
        let e = flattened_operator_norm(&m, NormPair::OneToOne).unwrap();
        assert!((e.lower - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_to_one_bracket_contains_channel_norm() {
        // a GKSL semigroup step is trace preserving and positive: 1→1 norm is 1
        let b = FockBasis::single_mode(4).unwrap();
        let a = annihilation(&b, 0).unwrap();
        let l = crate::liouville::gksl(&b, Some(&number_operator(&b, 0).unwrap()), &[a]).unwrap();
        let m = Propagator::default().step_superop(&l, 0.4).unwrap();
        let e = flattened_operator_norm(&m, NormPair::OneToOne).unwrap();
        assert!((e.lower - 1.0).abs() < 1e-9, "{e:?}");
        assert!(e.upper >= 1.0);
    }

    #[test]
    fn fit_order_examples() {
        let r = fit_order(&[10.0, 100.0, 1000.0], &[1e-2, 1e-3, 1e-4], 1e-12).unwrap();
        assert!((r.slope + 1.0).abs() < 1e-12);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        let r = fit_order(&[1.0, 2.0, 4.0, 8.0], &[0.5; 4], 1e-12).unwrap();
        assert!(r.slope.abs() < 1e-12);
        let r = fit_order(&[4.0, 8.0, 16.0, 32.0], &[1e-3, 0.0, 1e-11, 1e-5], 1e-12);
        assert!(matches!(r, Err(Error::InsufficientPoints { usable: 2 })));
        let r = fit_order(&[4.0, 8.0, 16.0, 32.0, 64.0], &[1e-3, 5e-4, 0.0, 1e-11, 3e-5], 1e-12).unwrap();
        assert_eq!(r.exact, vec![false, false, true, false, false]);
        assert_eq!(r.saturated, vec![false, false, false, true, false]);
    }

    #[test]
    fn planted_slope_recovered_under_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ns: Vec<f64> = (0..11).map(|k| 10f64 * 10f64.powf(k as f64 / 10.0)).collect();
        for _ in 0..50 {
            let errors: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let eps: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                    3.0 / (n * n) * (1.0 + 0.01 * eps)
                })
                .collect();
            let r = fit_order(&ns, &errors, 1e-15).unwrap();
            assert!((r.slope + 2.0).abs() <= 0.05);
        }
    }

    #[test]
    fn exponential_rate_fit() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * (-2.5 * t).exp()).collect();
        let (rate, c, r2) = fit_exponential_rate(&ts, &vs).unwrap();
        assert!((rate - 2.5).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12 && r2 > 0.999999);
    }

    #[test]
    fn relative_bound_examples() {
        let b = FockBasis::single_mode(5).unwrap();
        let w = SobolevWeight::uniform(&b, 4.0).unwrap();
        let zero = Liouvillian::zero(&b);
        assert_eq!(relative_bound_diagnostic(&zero, &w, 5, 5, 1).unwrap().ratio, 0.0);
        let l = commutator_generator(&number_operator(&b, 0).unwrap()).unwrap();
        // x = |0⟩⟨1|: ‖L x‖₁ = 1, ‖x‖_W = (1+0)·(1+1) = 2
        let only_unit = relative_bound_diagnostic(&l, &w, 1, 2, 9).unwrap();
        assert!(only_unit.ratio >= 0.5 - 1e-15);
        let mut x = CMat::zeros(5, 5);
        x[(0, 1)] = ONE;
        let r = trace_norm(&l.apply(&x)) / sobolev_norm(&x, &w).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        let r2 = trace_norm(&l.apply(&(&x * C64::new(7.0, 0.0)))) / sobolev_norm(&(&x * C64::new(7.0, 0.0)), &w).unwrap();
        assert!((r - r2).abs() < 1e-14);
    }

    #[test]
    fn moment_stability_trivial_cases() {
        let b = FockBasis::single_mode(6).unwrap();
        let w = SobolevWeight::uniform(&b, 2.0).unwrap();
        let states = admissible_states(&b, &[0]);
        let rep = moment_stability_check(&Liouvillian::zero(&b), &w, &states, Some(0.0)).unwrap();
        assert!(rep.max_margin <= 0.0);
        let l = commutator_generator(&number_operator(&b, 0).unwrap()).unwrap();
        let diag_states: Vec<CMat> = (0..6).map(|n| DensityOperator::fock(&b, &[n]).unwrap().into_matrix()).collect();
        let rep = moment_stability_check(&l, &w, &diag_states, Some(0.0)).unwrap();
        assert!(rep.margins.iter().all(|m| m.abs() < 1e-14));
        let a = annihilation(&b, 0).unwrap();
        let damp = crate::liouville::dissipator(&a);
        let top = DensityOperator::fock(&b, &[5]).unwrap().into_matrix();
        assert!(matches!(
            moment_stability_check(&damp, &w, &[top], None),
            Err(Error::SupportViolation { .. })
        ));
        let neg = diag(&[1.5, -0.5, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(moment_stability_check(&damp, &w, &[neg], None), Err(Error::NotPositive { .. })));
    }

    #[test]
    fn drift_diagnostic_cases() {
        let b = FockBasis::new(vec![10, 4]).unwrap();
        let rho = DensityOperator::maximally_mixed(&b);
        let d = drift_diagnostics(&rho);
        assert!(d.trace_drift < 1e-14);
        assert!((d.top_level_mass[0] - 0.2).abs() < 1e-14);
        assert!((d.top_level_mass[1] - 0.5).abs() < 1e-14);
        let vac = DensityOperator::fock(&b, &[0, 0]).unwrap();
        let d = drift_diagnostics(&vac);
        assert_eq!(d.top_level_mass, vec![0.0, 0.0]);
        assert!(d.min_eig >= 0.0);
    }

    #[test]
    fn zeno_condition_commuting_is_zero_and_guards_grid() {
        let b = FockBasis::single_mode(4).unwrap();
        let n = number_operator(&b, 0).unwrap();
        let mut p = CMat::zeros(4, 4);
        p[(0, 0)] = ONE;
        p[(1, 1)] = ONE;
        let ps = ProjectorSuperOp::new(&Operator::from_matrix(&b, p).unwrap()).unwrap();
        let v = Schedule::autonomous(&commutator_generator(&n).unwrap(), 1.0).unwrap();
        let rep = zeno_condition_check(&ps, &v, &[0.0, 0.5, 1.0]).unwrap();
        assert!(rep.b < 1e-12);
        assert!(zeno_condition_check(&ps, &v, &[0.5, 0.5]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn norm_axioms(seed in 0u64..100_000, c in -3.0f64..3.0) {
            let b = FockBasis::single_mode(5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = linalg::random_hermitian(5, &mut rng);
            let y = linalg::random_hermitian(5, &mut rng);
            let w1 = SobolevWeight::uniform(&b, 1.0).unwrap();
            let w3 = SobolevWeight::uniform(&b, 3.0).unwrap();
            for f in [
                &(|m: &CMat| trace_norm(m)) as &dyn Fn(&CMat) -> f64,
                &|m: &CMat| sobolev_norm(m, &w1).unwrap(),
            ] {
                prop_assert!(f(&(&x + &y)) <= f(&x) + f(&y) + 1e-12);
                prop_assert!((f(&(&x * C64::new(c, 0.0))) - c.abs() * f(&x)).abs() <= 1e-12 * (1.0 + f(&x)));
                prop_assert!(f(&x) > 0.0);
            }
            prop_assert!(sobolev_norm(&x, &w3).unwrap() >= sobolev_norm(&x, &w1).unwrap() - 1e-12);
        }
    }
}
