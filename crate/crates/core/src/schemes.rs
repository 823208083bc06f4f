//! Product formulas: Trotter, Strang, Suzuki, time-dependent Trotter,
//! projective and general Zeno products, and the telescopic defect.
//!
//! Products are written left to right in decreasing step index; the
//! rightmost factor acts first. A Trotter step `e^{hA} e^{hB}` applies `B`
//! and then `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};
use crate::liouville::{DensityOperator, Liouvillian, ProjectorSuperOp, SuperOperator, SuperOperatorMatrix};
use crate::metrics::{flattened_operator_norm, trace_norm, NormPair};
use crate::propagators::{default_propagator, Propagator, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tag: Tag,
    pub coefficient: f64,
}

impl Stage {
    pub fn new(tag: Tag, coefficient: f64) -> Self {
        Self { tag, coefficient }
    }
}

/// `F(h) = e^{h p_1 X_1} ⋯ e^{h p_m X_m}` with `X_i ∈ {A, B}`, stages listed
/// left to right.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingScheme {
    name: String,
    stages: Vec<Stage>,
    order_claim: usize,
}

impl SplittingScheme {
    /// Validates consistency: the coefficients of each tag sum to one.
    pub fn custom(name: impl Into<String>, stages: Vec<Stage>, order_claim: usize) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::InvalidScheme("no stages".into()));
        }
        if stages.iter().any(|s| !s.coefficient.is_finite()) {
            return Err(Error::InvalidScheme("non-finite coefficient".into()));
        }
        for tag in [Tag::A, Tag::B] {
            let sum: f64 = stages.iter().filter(|s| s.tag == tag).map(|s| s.coefficient).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidScheme(format!("coefficients of {tag:?} sum to {sum}, not 1")));
            }
        }
        if order_claim == 0 {
            return Err(Error::InvalidScheme("order claim must be at least 1".into()));
        }
        Ok(Self { name: name.into(), stages: merge_adjacent(stages), order_claim })
    }

    pub fn trotter() -> Self {
        Self { name: "trotter".into(), stages: vec![Stage::new(Tag::A, 1.0), Stage::new(Tag::B, 1.0)], order_claim: 1 }
    }

    pub fn strang() -> Self {
        Self {
            name: "strang".into(),
            stages: vec![Stage::new(Tag::B, 0.5), Stage::new(Tag::A, 1.0), Stage::new(Tag::B, 0.5)],
            order_claim: 2,
        }
    }

    /// Suzuki's fractal family of even order:
    /// `S_{2k}(h) = S_{2k−2}(p h)² S_{2k−2}((1−4p) h) S_{2k−2}(p h)²` with
    /// `p = 1/(4 − 4^{1/(2k−1)})`, starting from Strang.
    pub fn suzuki(order: usize) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::InvalidScheme(format!("Suzuki order must be even and ≥ 2, got {order}")));
        }
        let mut stages = Self::strang().stages;
        for k in 2..=order / 2 {
            let p = 1.0 / (4.0 - 4f64.powf(1.0 / (2 * k - 1) as f64));
            let scaled = |c: f64| stages.iter().map(move |s| Stage::new(s.tag, s.coefficient * c));
            let mut next = Vec::with_capacity(stages.len() * 5);
            for c in [p, p, 1.0 - 4.0 * p, p, p] {
                next.extend(scaled(c));
            }
            stages = merge_adjacent(next);
        }
        Ok(Self { name: format!("suzuki{order}"), stages, order_claim: order })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn order_claim(&self) -> usize {
        self.order_claim
    }

    /// Negative coefficients mean backward steps: both generators must be
    /// reversible.
    pub fn is_reversible_only(&self) -> bool {
        self.stages.iter().any(|s| s.coefficient < 0.0)
    }
}

fn merge_adjacent(stages: Vec<Stage>) -> Vec<Stage> {
    let mut out: Vec<Stage> = Vec::with_capacity(stages.len());
    for s in stages {
        match out.last_mut() {
            Some(last) if last.tag == s.tag => last.coefficient += s.coefficient,
            _ => out.push(s),
        }
    }
    out.retain(|s| s.coefficient != 0.0);
    out
}

/// Strictly increasing time points `s_0 < s_1 < … < s_n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPartition("need at least one interval".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPartition("non-finite point".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPartition("points must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    pub fn uniform(t0: f64, t1: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("n must be at least 1".into()));
        }
        let h = (t1 - t0) / n as f64;
        let mut points: Vec<f64> = (0..=n).map(|j| t0 + j as f64 * h).collect();
        points[n] = t1;
        Self::new(points)
    }

    /// `s_j = t0 + (t1 − t0)(j/n)^power`; `power > 1` refines near `t0`.
    pub fn graded(t0: f64, t1: f64, n: usize, power: f64) -> Result<Self> {
        if n == 0 || !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidPartition("graded partition needs n ≥ 1 and power > 0".into()));
        }
        let points = (0..=n).map(|j| t0 + (t1 - t0) * (j as f64 / n as f64).powf(power)).collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.n()]
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn max_step(&self) -> f64 {
        self.intervals().map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    /// The common step when all intervals agree to rounding.
    pub fn uniform_step(&self) -> Option<f64> {
        let h = (self.end() - self.start()) / self.n() as f64;
        let tol = 1e-12 * h.abs().max(self.end().abs());
        self.intervals().all(|(a, b)| ((b - a) - h).abs() <= tol).then_some(h)
    }

    /// Step sizes, with the exact common step for uniform partitions so that
    /// every factor is bit-identical.
    fn steps(&self) -> Vec<f64> {
        match self.uniform_step() {
            Some(h) => vec![h; self.n()],
            None => self.intervals().map(|(a, b)| b - a).collect(),
        }
    }
}

fn check_pair(a: &Liouvillian, b: &Liouvillian, x: &CMat) -> Result<()> {
    if a.basis() != b.basis() {
        return Err(Error::BasisMismatch);
    }
    if x.nrows() != a.basis().total_dim() {
        return Err(Error::DimensionMismatch { expected: a.basis().total_dim(), found: x.nrows() });
    }
    Ok(())
}

/// One step `F(h) x` of a splitting scheme.
pub fn scheme_step(prop: &Propagator, scheme: &SplittingScheme, a: &Liouvillian, b: &Liouvillian, h: f64, x: &CMat) -> Result<CMat> {
    if scheme.is_reversible_only() && !(a.is_pure_commutator() && b.is_pure_commutator()) {
        return Err(Error::ReversibleOnly);
    }
    let mut y = x.clone();
    for stage in scheme.stages().iter().rev() {
        let gen = match stage.tag {
            Tag::A => a,
            Tag::B => b,
        };
        y = prop.step(gen, h * stage.coefficient, &y)?;
    }
    Ok(y)
}

/// `Π_j F(s_j − s_{j−1}) x` over a partition.
pub fn splitting_product(
    prop: &Propagator,
    scheme: &SplittingScheme,
    a: &Liouvillian,
    b: &Liouvillian,
    partition: &Partition,
    x: &CMat,
) -> Result<CMat> {
    check_pair(a, b, x)?;
    if scheme.is_reversible_only() && !(a.is_pure_commutator() && b.is_pure_commutator()) {
        return Err(Error::ReversibleOnly);
    }
    let mut y = x.clone();
    for h in partition.steps() {
        y = scheme_step(prop, scheme, a, b, h, &y)?;
    }
    Ok(y)
}

fn uniform_product(scheme: &SplittingScheme, a: &Liouvillian, b: &Liouvillian, t: f64, n: usize, x: &DensityOperator) -> Result<DensityOperator> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("product time {t} must be ≥ 0")));
    }
    if n == 0 {
        return Err(Error::InvalidPartition("n must be at least 1".into()));
    }
    if t == 0.0 {
        return Ok(x.clone());
    }
    let partition = Partition::uniform(0.0, t, n)?;
    let y = splitting_product(default_propagator(), scheme, a, b, &partition, x.matrix())?;
    Ok(DensityOperator::from_raw(x.basis(), y))
}

/// `(e^{(t/n)A} e^{(t/n)B})ⁿ x`.
pub fn trotter_product(a: &Liouvillian, b: &Liouvillian, t: f64, n: usize, x: &DensityOperator) -> Result<DensityOperator> {
    uniform_product(&SplittingScheme::trotter(), a, b, t, n, x)
}

/// `(e^{(t/2n)B} e^{(t/n)A} e^{(t/2n)B})ⁿ x`.
pub fn strang_product(a: &Liouvillian, b: &Liouvillian, t: f64, n: usize, x: &DensityOperator) -> Result<DensityOperator> {
    uniform_product(&SplittingScheme::strang(), a, b, t, n, x)
}

/// `F(t/n)ⁿ x` for any splitting scheme.
pub fn suzuki_product(
    scheme: &SplittingScheme,
    a: &Liouvillian,
    b: &Liouvillian,
    t: f64,
    n: usize,
    x: &DensityOperator,
) -> Result<DensityOperator> {
    uniform_product(scheme, a, b, t, n, x)
}

/// Evolution-system step of a schedule: exact for autonomous schedules,
/// Runge-Kutta otherwise.
pub fn schedule_step(prop: &Propagator, s: &Schedule, s0: f64, s1: f64, x: &CMat) -> Result<CMat> {
    s.check_window(s0, s1)?;
    if s.terms().is_empty() {
        return Ok(x.clone());
    }
    if s.is_autonomous() {
        return prop.step(&s.generator_at(s0)?, s1 - s0, x);
    }
    prop.schedule_step(s, s0, s1, x)
}

/// `Π_j U(s_j, s_{j−1}) V(s_j, s_{j−1}) x` (per interval `V` acts first).
pub fn time_dependent_trotter_with(prop: &Propagator, u: &Schedule, v: &Schedule, partition: &Partition, x: &CMat) -> Result<CMat> {
    if u.basis() != v.basis() {
        return Err(Error::BasisMismatch);
    }
    u.check_window(partition.start(), partition.end())?;
    v.check_window(partition.start(), partition.end())?;
    let mut y = x.clone();
    for (s0, s1) in partition.intervals() {
        y = schedule_step(prop, v, s0, s1, &y)?;
        y = schedule_step(prop, u, s0, s1, &y)?;
    }
    Ok(y)
}

pub fn time_dependent_trotter(u: &Schedule, v: &Schedule, partition: &Partition, x: &DensityOperator) -> Result<DensityOperator> {
    let y = time_dependent_trotter_with(default_propagator(), u, v, partition, x.matrix())?;
    Ok(DensityOperator::from_raw(x.basis(), y))
}

/// `(P e^{(t/n)L} P)ⁿ P x`.
pub fn zeno_product_with(prop: &Propagator, p: &ProjectorSuperOp, l: &Liouvillian, t: f64, n: usize, x: &CMat) -> Result<CMat> {
    if n == 0 {
        return Err(Error::InvalidPartition("n must be at least 1".into()));
    }
    if p.basis() != l.basis() {
        return Err(Error::BasisMismatch);
    }
    let h = t / n as f64;
    let mut y = p.apply(x);
    for _ in 0..n {
        y = p.apply(&prop.step(l, h, &y)?);
    }
    Ok(y)
}

pub fn zeno_product(p: &ProjectorSuperOp, l: &Liouvillian, t: f64, n: usize, x: &DensityOperator) -> Result<DensityOperator> {
    let y = zeno_product_with(default_propagator(), p, l, t, n, x.matrix())?;
    Ok(DensityOperator::from_raw(x.basis(), y))
}

/// `e^{t PLP} P x`, the projective Zeno limit. Reversible generators use the
/// compressed Hamiltonian `PHP`, whose unitary stays in the code block.
pub fn zeno_limit_with(prop: &Propagator, p: &ProjectorSuperOp, l: &Liouvillian, t: f64, x: &CMat) -> Result<CMat> {
    let px = p.apply(x);
    if l.is_pure_commutator() {
        let pm = p.projector().matrix();
        if linalg::hermiticity_defect(pm) <= 1e-12 {
            let Some(h) = l.hamiltonian() else { return Ok(px) };
            let php = linalg::hermitian_part(&linalg::matmul(&linalg::matmul(pm, h.matrix()), pm));
            let compressed = crate::liouville::commutator_generator(&crate::fock::Operator::from_matrix(l.basis(), php)?)?;
            return prop.step(&compressed, t, &px);
        }
    }
    let compressed = crate::liouville::Compressed { projector: p.clone(), inner: l.clone() };
    prop.evolve_superop(&compressed, t, &px)
}

/// The measurement of a Zeno product.
#[derive(Debug, Clone)]
pub enum Measurement {
    Projective(ProjectorSuperOp),
    General(SuperOperatorMatrix),
}

/// A measurement `M` with limiting projection `P` and, for general `M`, a
/// verified rate `‖Mⁿ − P‖ ≤ δⁿ`.
#[derive(Debug, Clone)]
pub struct ZenoSpec {
    measurement: Measurement,
    projector: ProjectorSuperOp,
    delta: Option<f64>,
    /// `(n, ‖Mⁿ − P‖₂)` for the checked powers.
    power_norms: Vec<(usize, f64)>,
}

impl ZenoSpec {
    pub fn projective(p: &ProjectorSuperOp) -> Self {
        Self { measurement: Measurement::Projective(p.clone()), projector: p.clone(), delta: None, power_norms: Vec::new() }
    }

    /// Verifies `‖Mⁿ − P‖ ≤ δⁿ` in the flattened 2→2 norm for `n = 1..=n_check`.
    pub fn general(m: SuperOperatorMatrix, p: &ProjectorSuperOp, delta: f64, n_check: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("δ = {delta} must lie in [0, 1)")));
        }
        if m.hilbert_dim() != p.hilbert_dim() {
            return Err(Error::DimensionMismatch { expected: p.hilbert_dim(), found: m.hilbert_dim() });
        }
        let pm = SuperOperatorMatrix::new(p.hilbert_dim(), p.to_matrix())?;
        let mut power = m.clone();
        let mut power_norms = Vec::with_capacity(n_check);
        for n in 1..=n_check {
            if n > 1 {
                power = power.compose(&m)?;
            }
            let diff = SuperOperatorMatrix::new(p.hilbert_dim(), power.matrix() - pm.matrix())?;
            let norm = flattened_operator_norm(&diff, NormPair::TwoToTwo)?.upper;
            let bound = delta.powi(n as i32);
            if norm > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::PowerConvergence { n, norm, bound });
            }
            power_norms.push((n, norm));
        }
        Ok(Self { measurement: Measurement::General(m), projector: p.clone(), delta: Some(delta), power_norms })
    }

    pub fn measurement(&self) -> &Measurement {
        &self.measurement
    }

    pub fn projector(&self) -> &ProjectorSuperOp {
        &self.projector
    }

    pub fn delta(&self) -> Option<f64> {
        self.delta
    }

    pub fn power_norms(&self) -> &[(usize, f64)] {
        &self.power_norms
    }

    pub fn measure(&self, x: &CMat) -> CMat {
        match &self.measurement {
            Measurement::Projective(p) => p.apply(x),
            Measurement::General(m) => m.apply(x),
        }
    }

    /// The same run with `M` replaced by its limit `P`.
    pub fn projective_counterpart(&self) -> Self {
        Self::projective(&self.projector)
    }
}

/// `Π_j M V(s_j, s_{j−1}) x`.
pub fn zeno_product_general_with(prop: &Propagator, z: &ZenoSpec, v: &Schedule, partition: &Partition, x: &CMat) -> Result<CMat> {
    v.check_window(partition.start(), partition.end())?;
    let mut y = x.clone();
    let steps = partition.steps();
    for ((s0, _), h) in partition.intervals().zip(steps) {
        let stepped = if v.is_autonomous() {
            prop.step(&v.generator_at(s0)?, h, &y)?
        } else {
            schedule_step(prop, v, s0, s0 + h, &y)?
        };
        y = z.measure(&stepped);
    }
    Ok(y)
}

pub fn zeno_product_general(z: &ZenoSpec, v: &Schedule, partition: &Partition, x: &DensityOperator) -> Result<DensityOperator> {
    let y = zeno_product_general_with(default_propagator(), z, v, partition, x.matrix())?;
    Ok(DensityOperator::from_raw(x.basis(), y))
}

/// `M = P + δ (1−P) mixer (1−P)`; `‖Mⁿ − P‖ = δⁿ` when the mixer is an
/// isometry of the complement.
pub fn make_uniform_power_contraction(p: &ProjectorSuperOp, delta: f64, mixer: &SuperOperatorMatrix, n_check: usize) -> Result<ZenoSpec> {
    let d = p.hilbert_dim();
    if mixer.hilbert_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: mixer.hilbert_dim() });
    }
    let pm = p.to_matrix();
    let qm = linalg::identity(d * d) - &pm;
    let leak = linalg::spectral_norm(&linalg::matmul(&linalg::matmul(&pm, mixer.matrix()), &qm));
    if leak > 1e-12 {
        return Err(Error::MixerLeak { leak });
    }
    let m = &pm + linalg::matmul(&linalg::matmul(&qm, mixer.matrix()), &qm) * C64::new(delta, 0.0);
    ZenoSpec::general(SuperOperatorMatrix::new(d, m)?, p, delta, n_check)
}

/// Unitary channel `x ↦ U x U†` with `U = P + (1−P) W (1−P)`, `W` Haar
/// random on the complement of the (orthogonal) projector `P`.
pub fn complement_unitary_mixer<R: rand::Rng + ?Sized>(p: &ProjectorSuperOp, rng: &mut R) -> Result<SuperOperatorMatrix> {
    let pm = p.projector().matrix();
    let d = pm.nrows();
    let (vals, vecs) = linalg::eigh(pm);
    let rank = vals.iter().filter(|v| **v > 0.5).count();
    // eigenvalues ascend: complement first, range last
    let haar = linalg::random_unitary(d - rank, rng);
    let mut inner = linalg::identity(d);
    for r in 0..d - rank {
        for c in 0..d - rank {
            inner[(r, c)] = haar[(r, c)];
        }
    }
    let u = linalg::matmul(&linalg::matmul(&vecs, &inner), &vecs.adjoint());
    let flat = linalg::kron(&u.conjugate(), &u);
    SuperOperatorMatrix::new(d, flat)
}

/// A two-time step map `x ↦ F(s1, s0) x`.
pub trait StepMap: Sync {
    fn step(&self, s0: f64, s1: f64, x: &CMat) -> Result<CMat>;
}

impl<F> StepMap for F
where
    F: Fn(f64, f64, &CMat) -> Result<CMat> + Sync,
{
    fn step(&self, s0: f64, s1: f64, x: &CMat) -> Result<CMat> {
        self(s0, s1, x)
    }
}

/// Telescopic-sum comparison of a product against the exact evolution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TelescopicReport {
    /// `‖(F(s_j, s_{j−1}) − T(s_j, s_{j−1})) T(s_{j−1}, s_0) x‖₁`.
    pub defects: Vec<f64>,
    pub max_defect: f64,
    /// `n · max_defect`.
    pub bound: f64,
    /// `‖Π F x − T(s_n, s_0) x‖₁`.
    pub product_error: f64,
}

/// Per-step defects along the exact orbit. `F` must not increase the trace
/// norm (within `1e−9`) along either orbit.
pub fn telescopic_defect(f: &dyn StepMap, exact: &dyn StepMap, partition: &Partition, x: &CMat) -> Result<TelescopicReport> {
    let mut orbit = x.clone();
    let mut product = x.clone();
    let mut defects = Vec::with_capacity(partition.n());
    for (j, (s0, s1)) in partition.intervals().enumerate() {
        let next = exact.step(s0, s1, &orbit)?;
        let approx = f.step(s0, s1, &orbit)?;
        let growth = trace_norm(&approx) - trace_norm(&orbit);
        if growth > 1e-9 {
            return Err(Error::NotContractive { step: j + 1, growth });
        }
        defects.push(trace_norm(&(approx - &next)));
        let before = trace_norm(&product);
        product = f.step(s0, s1, &product)?;
        let growth = trace_norm(&product) - before;
        if growth > 1e-9 {
            return Err(Error::NotContractive { step: j + 1, growth });
        }
        orbit = next;
    }
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    Ok(TelescopicReport {
        bound: partition.n() as f64 * max_defect,
        max_defect,
        defects,
        product_error: trace_norm(&(product - orbit)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation, number_operator, FockBasis, Operator};
    use crate::liouville::{commutator_generator, dissipator, gksl};
    use crate::propagators::{Modulation, ScheduleTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ou_pair(d: usize) -> (Liouvillian, Liouvillian, DensityOperator) {
        let b = FockBasis::single_mode(d).unwrap();
        let a = annihilation(&b, 0).unwrap();
        let la = dissipator(&a);
        let lb = dissipator(&a.dagger().scale(C64::new(0.5, 0.0)));
        (la, lb, DensityOperator::fock(&b, &[1]).unwrap())
    }

    fn diff(a: &DensityOperator, b: &DensityOperator) -> f64 {
        trace_norm(&(a.matrix() - b.matrix()))
    }

    #[test]
    fn scheme_validation_and_flags() {
        assert!(SplittingScheme::custom("bad", vec![Stage::new(Tag::A, 1.0)], 1).is_err());
        assert!(SplittingScheme::custom("bad", vec![Stage::new(Tag::A, 0.5), Stage::new(Tag::B, 1.0)], 1).is_err());
        assert!(SplittingScheme::custom("bad", vec![], 1).is_err());
        let s = SplittingScheme::custom("ok", vec![Stage::new(Tag::B, 1.0), Stage::new(Tag::A, 1.0)], 1).unwrap();
        assert!(!s.is_reversible_only());
        assert!(!SplittingScheme::strang().is_reversible_only());
        let s4 = SplittingScheme::suzuki(4).unwrap();
        assert!(s4.is_reversible_only());
        assert_eq!(s4.order_claim(), 4);
        assert!(SplittingScheme::suzuki(3).is_err());
        assert_eq!(SplittingScheme::suzuki(2).unwrap().stages(), SplittingScheme::strang().stages());
    }

    #[test]
    fn suzuki4_coefficients_are_the_fractal_pattern() {
        let p = 1.0 / (4.0 - 4f64.powf(1.0 / 3.0));
        let s = SplittingScheme::suzuki(4).unwrap();
        // B p/2, A p, B p, A p, B (1−3p)/2, A (1−4p), B (1−3p)/2, A p, B p, A p, B p/2
        let want = [
            (Tag::B, p / 2.0),
            (Tag::A, p),
            (Tag::B, p),
            (Tag::A, p),
            (Tag::B, (1.0 - 3.0 * p) / 2.0),
            (Tag::A, 1.0 - 4.0 * p),
            (Tag::B, (1.0 - 3.0 * p) / 2.0),
            (Tag::A, p),
            (Tag::B, p),
            (Tag::A, p),
            (Tag::B, p / 2.0),
        ];
        assert_eq!(s.stages().len(), want.len());
        for (st, (tag, c)) in s.stages().iter().zip(want) {
            assert_eq!(st.tag, tag);
            assert!((st.coefficient - c).abs() < 1e-15);
        }
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Partition::uniform(0.0, 1.0, 0).is_err());
        let p = Partition::graded(0.0, 1.0, 4, 2.0).unwrap();
        assert_eq!(p.points(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);
        assert!((p.max_step() - 0.4375).abs() < 1e-15);
        assert!(p.uniform_step().is_none());
        assert!(Partition::uniform(0.0, 0.3, 7).unwrap().uniform_step().is_some());
    }

    #[test]
    fn trivial_reductions() {
        let (la, lb, x) = ou_pair(12);
        let b = la.basis().clone();
        let exact_a = crate::propagators::semigroup_step(&la, 0.5, &x).unwrap();
        let zero = Liouvillian::zero(&b);
        assert!(diff(&trotter_product(&la, &zero, 0.5, 7, &x).unwrap(), &exact_a) < 1e-14);
        let via_scheme = suzuki_product(&SplittingScheme::trotter(), &la, &lb, 0.5, 5, &x).unwrap();
        assert_eq!(via_scheme, trotter_product(&la, &lb, 0.5, 5, &x).unwrap());
        let via_scheme = suzuki_product(&SplittingScheme::strang(), &la, &lb, 0.5, 5, &x).unwrap();
        assert_eq!(via_scheme, strang_product(&la, &lb, 0.5, 5, &x).unwrap());
        // n = 1 Strang is one step F(t)
        let single = strang_product(&la, &lb, 0.5, 1, &x).unwrap();
        let p = default_propagator();
        let manual = p.step(&lb, 0.25, x.matrix()).unwrap();
        let manual = p.step(&la, 0.5, &manual).unwrap();
        let manual = p.step(&lb, 0.25, &manual).unwrap();
        assert!(linalg::max_abs(&(single.matrix() - manual)) < 1e-15);
    }

    #[test]
    fn commuting_generators_are_exact() {
        let b = FockBasis::new(vec![4, 3]).unwrap();
        let a = commutator_generator(&number_operator(&b, 0).unwrap()).unwrap();
        let c = commutator_generator(&number_operator(&b, 1).unwrap().scale(C64::new(0.7, 0.0))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DensityOperator::new(&b, linalg::random_density(12, &mut rng)).unwrap();
        let exact = crate::propagators::semigroup_step(&a.sum(&c).unwrap(), 1.3, &x).unwrap();
        for n in [1, 3, 8] {
            for scheme in [SplittingScheme::trotter(), SplittingScheme::strang(), SplittingScheme::suzuki(4).unwrap()] {
                assert!(diff(&suzuki_product(&scheme, &a, &c, 1.3, n, &x).unwrap(), &exact) < 1e-10);
            }
        }
    }

    #[test]
    fn reversible_only_enforced() {
        let (la, lb, x) = ou_pair(6);
        let s4 = SplittingScheme::suzuki(4).unwrap();
        assert!(matches!(suzuki_product(&s4, &la, &lb, 0.5, 2, &x), Err(Error::ReversibleOnly)));
    }

    #[test]
    fn partition_invariance_for_equal_steps() {
        let (la, lb, x) = ou_pair(10);
        let p = default_propagator();
        let s = SplittingScheme::strang();
        let uniform = splitting_product(p, &s, &la, &lb, &Partition::uniform(0.0, 0.5, 6).unwrap(), x.matrix()).unwrap();
        let shifted = splitting_product(p, &s, &la, &lb, &Partition::uniform(1.0, 1.5, 6).unwrap(), x.matrix()).unwrap();
        assert_eq!(uniform, shifted);
    }

    #[test]
    fn zeno_trivial_cases() {
        let b = FockBasis::single_mode(5).unwrap();
        let mut pm = CMat::zeros(5, 5);
        pm[(0, 0)] = C64::new(1.0, 0.0);
        pm[(1, 1)] = C64::new(1.0, 0.0);
        let p = ProjectorSuperOp::new(&Operator::from_matrix(&b, pm).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DensityOperator::new(&b, linalg::random_density(5, &mut rng)).unwrap();
        let zero = Liouvillian::zero(&b);
        let y = zeno_product(&p, &zero, 1.0, 4, &x).unwrap();
        assert!(linalg::max_abs(&(y.matrix() - p.apply(x.matrix()))) < 1e-15);
        let l = gksl(&b, Some(&number_operator(&b, 0).unwrap()), &[annihilation(&b, 0).unwrap()]).unwrap();
        let id = ProjectorSuperOp::new(&Operator::identity(&b)).unwrap();
        let y = zeno_product(&id, &l, 0.8, 5, &x).unwrap();
        assert!(diff(&y, &crate::propagators::semigroup_step(&l, 0.8, &x).unwrap()) < 1e-13);
    }

    #[test]
    fn zeno_limit_paths_agree() {
        // compressed Hamiltonian route vs flattened P L P exponential
        let b = FockBasis::single_mode(4).unwrap();
        let a = annihilation(&b, 0).unwrap();
        let h = a.add(&a.dagger()).unwrap();
        let l = commutator_generator(&h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v = linalg::random_unitary(4, &mut rng);
        let cols = v.columns(0, 2).into_owned();
        let pm = linalg::matmul(&cols, &cols.adjoint());
        let p = ProjectorSuperOp::new(&Operator::from_matrix(&b, pm).unwrap()).unwrap();
        let x = linalg::random_density(4, &mut rng);
        let prop = Propagator::default();
        let fast = zeno_limit_with(&prop, &p, &l, 0.9, &x).unwrap();
        let compressed = crate::liouville::Compressed { projector: p.clone(), inner: l.clone() };
        let flat = crate::propagators::expm(&compressed.to_matrix(), 0.9).unwrap();
        let slow = linalg::unvec(&(flat * linalg::vec_of(&p.apply(&x))), 4);
        assert!(linalg::max_abs(&(fast - slow)) < 1e-12);
    }

    #[test]
    fn uniform_power_contraction_is_exact() {
        let b = FockBasis::single_mode(5).unwrap();
        let mut pm = CMat::zeros(5, 5);
        pm[(0, 0)] = C64::new(1.0, 0.0);
        pm[(3, 3)] = C64::new(1.0, 0.0);
        let p = ProjectorSuperOp::new(&Operator::from_matrix(&b, pm).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mixer = complement_unitary_mixer(&p, &mut rng).unwrap();
        let z = make_uniform_power_contraction(&p, 0.5, &mixer, 10).unwrap();
        for &(n, norm) in z.power_norms() {
            assert!((norm / 0.5f64.powi(n as i32) - 1.0).abs() < 1e-10);
        }
        let id = SuperOperatorMatrix::identity(5);
        let z = make_uniform_power_contraction(&p, 0.3, &id, 6).unwrap();
        for &(n, norm) in z.power_norms() {
            assert!((norm / 0.3f64.powi(n as i32) - 1.0).abs() < 1e-12);
        }
        let z0 = make_uniform_power_contraction(&p, 0.0, &mixer, 3).unwrap();
        let Measurement::General(m) = z0.measurement() else { panic!() };
        assert!(linalg::max_abs(&(m.matrix() - p.to_matrix())) < 1e-15);
        // a full unitary channel moves the code block: leak
        let w = linalg::random_unitary(5, &mut rng);
        let leaky = SuperOperatorMatrix::new(5, linalg::kron(&w.conjugate(), &w)).unwrap();
        assert!(matches!(make_uniform_power_contraction(&p, 0.5, &leaky, 3), Err(Error::MixerLeak { .. })));
        assert!(make_uniform_power_contraction(&p, 1.2, &mixer, 3).is_err());
    }

    #[test]
    fn general_zeno_with_exact_projection_equals_projective() {
        let b = FockBasis::single_mode(4).unwrap();
        let mut pm = CMat::zeros(4, 4);
        pm[(0, 0)] = C64::new(1.0, 0.0);
        pm[(1, 1)] = C64::new(1.0, 0.0);
        let p = ProjectorSuperOp::new(&Operator::from_matrix(&b, pm).unwrap()).unwrap();
        let a = annihilation(&b, 0).unwrap();
        let l = commutator_generator(&a.add(&a.dagger()).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho = linalg::random_density(4, &mut rng);
        let x = DensityOperator::new(&b, p.apply(&rho)).unwrap();
        let v = Schedule::autonomous(&l, 1.0).unwrap();
        let z = ZenoSpec::projective(&p);
        let general = zeno_product_general(&z, &v, &Partition::uniform(0.0, 1.0, 6).unwrap(), &x).unwrap();
        let proj = zeno_product(&p, &l, 1.0, 6, &x).unwrap();
        assert!(diff(&general, &proj) < 1e-13);
    }

    #[test]
    fn time_dependent_reductions() {
        let b = FockBasis::single_mode(6).unwrap();
        let a = annihilation(&b, 0).unwrap();
        let h1 = commutator_generator(&a.add(&a.dagger()).unwrap()).unwrap();
        let h2 = commutator_generator(&number_operator(&b, 0).unwrap()).unwrap();
        let x = DensityOperator::fock(&b, &[0]).unwrap();
        let part = Partition::uniform(0.0, 1.0, 5).unwrap();
        // autonomous schedules reproduce trotter_product
        let u = Schedule::autonomous(&h1, 1.0).unwrap();
        let v = Schedule::autonomous(&h2, 1.0).unwrap();
        let td = time_dependent_trotter(&u, &v, &part, &x).unwrap();
        assert!(diff(&td, &trotter_product(&h1, &h2, 1.0, 5, &x).unwrap()) < 1e-13);
        // zero V gives the U evolution
        let u = Schedule::new(&b, 1.0, vec![ScheduleTerm { generator: h1.clone(), modulation: Modulation::cos() }]).unwrap();
        let zero = Schedule::zero(&b, 1.0).unwrap();
        let td = time_dependent_trotter(&u, &zero, &part, &x).unwrap();
        let full = crate::propagators::reference_evolution(&u, 0.0, 1.0, &x, 1e-11).unwrap();
        assert!(diff(&td, &full) < 1e-10);
    }

    #[test]
    fn telescopic_trivial_and_ou_cases() {
        let (la, lb, x) = ou_pair(14);
        let sum = la.sum(&lb).unwrap();
        let p = default_propagator();
        let exact = |s0: f64, s1: f64, y: &CMat| p.step(&sum, s1 - s0, y);
        let part = Partition::uniform(0.0, 0.5, 1).unwrap();
        let rep = telescopic_defect(&exact, &exact, &part, x.matrix()).unwrap();
        assert_eq!(rep.defects, vec![0.0]);
        assert_eq!(rep.product_error, 0.0);
        let s = SplittingScheme::trotter();
        let f = |s0: f64, s1: f64, y: &CMat| scheme_step(p, &s, &la, &lb, s1 - s0, y);
        let rep = telescopic_defect(&f, &exact, &part, x.matrix()).unwrap();
        assert!((rep.bound - rep.product_error).abs() < 1e-15 && (rep.max_defect - rep.product_error).abs() < 1e-15);
        for n in [2, 4, 8, 16] {
            let part = Partition::uniform(0.0, 0.5, n).unwrap();
            let rep = telescopic_defect(&f, &exact, &part, x.matrix()).unwrap();
            assert!(rep.product_error < rep.bound, "n = {n}: {rep:?}");
        }
    }
}
