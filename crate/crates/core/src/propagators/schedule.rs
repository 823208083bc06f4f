use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Operator};
use crate::linalg::{CMat, C64};
use crate::liouville::{gksl, Liouvillian, SuperOperator};

/// Scalar coefficient function of time.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Modulation {
    Constant {
        value: f64,
    },
    /// `amplitude · cos(frequency · t + phase)`
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · sin(frequency · t + phase)`
    Sin {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `offset + slope · t`
    Linear {
        #[serde(default)]
        offset: f64,
        slope: f64,
    },
    #[serde(skip)]
    Custom(CustomFn),
}

fn one() -> f64 {
    1.0
}

/// User-supplied coefficient; not serializable.
#[derive(Clone)]
pub struct CustomFn(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomFn(..)")
    }
}

impl fmt::Debug for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulation::Constant { value } => write!(f, "Constant({value})"),
            Modulation::Cos { amplitude, frequency, phase } => write!(f, "{amplitude}·cos({frequency}t+{phase})"),
            Modulation::Sin { amplitude, frequency, phase } => write!(f, "{amplitude}·sin({frequency}t+{phase})"),
            Modulation::Linear { offset, slope } => write!(f, "{offset}+{slope}t"),
            Modulation::Custom(c) => c.fmt(f),
        }
    }
}

impl PartialEq for Modulation {
    fn eq(&self, other: &Self) -> bool {
        use Modulation::*;
        match (self, other) {
            (Constant { value: a }, Constant { value: b }) => a == b,
            (Cos { amplitude: a, frequency: b, phase: c }, Cos { amplitude: x, frequency: y, phase: z })
            | (Sin { amplitude: a, frequency: b, phase: c }, Sin { amplitude: x, frequency: y, phase: z }) => {
                a == x && b == y && c == z
            }
            (Linear { offset: a, slope: b }, Linear { offset: x, slope: y }) => a == x && b == y,
            (Custom(a), Custom(b)) => Arc::ptr_eq(&a.0, &b.0),
            _ => false,
        }
    }
}

impl Modulation {
    pub fn constant(value: f64) -> Self {
        Modulation::Constant { value }
    }

    pub fn cos() -> Self {
        Modulation::Cos { amplitude: 1.0, frequency: 1.0, phase: 0.0 }
    }

    pub fn sin() -> Self {
        Modulation::Sin { amplitude: 1.0, frequency: 1.0, phase: 0.0 }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Modulation::Custom(CustomFn(Arc::new(f)))
    }

    pub fn at(&self, t: f64) -> f64 {
        match self {
            Modulation::Constant { value } => *value,
            Modulation::Cos { amplitude, frequency, phase } => amplitude * (frequency * t + phase).cos(),
            Modulation::Sin { amplitude, frequency, phase } => amplitude * (frequency * t + phase).sin(),
            Modulation::Linear { offset, slope } => offset + slope * t,
            Modulation::Custom(f) => (f.0)(t),
        }
    }

    /// `∫_{t0}^{t1} f`, when known in closed form.
    pub fn integral(&self, t0: f64, t1: f64) -> Option<f64> {
        match self {
            Modulation::Constant { value } => Some(value * (t1 - t0)),
            Modulation::Cos { amplitude, frequency, phase } if *frequency != 0.0 => {
                Some(amplitude / frequency * ((frequency * t1 + phase).sin() - (frequency * t0 + phase).sin()))
            }
            Modulation::Sin { amplitude, frequency, phase } if *frequency != 0.0 => {
                Some(-amplitude / frequency * ((frequency * t1 + phase).cos() - (frequency * t0 + phase).cos()))
            }
            Modulation::Cos { amplitude, phase, .. } => Some(amplitude * phase.cos() * (t1 - t0)),
            Modulation::Sin { amplitude, phase, .. } => Some(amplitude * phase.sin() * (t1 - t0)),
            Modulation::Linear { offset, slope } => Some(offset * (t1 - t0) + 0.5 * slope * (t1 * t1 - t0 * t0)),
            Modulation::Custom(_) => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Modulation::Constant { .. } => true,
            Modulation::Cos { amplitude, frequency, .. } | Modulation::Sin { amplitude, frequency, .. } => {
                *amplitude == 0.0 || *frequency == 0.0
            }
            Modulation::Linear { slope, .. } => *slope == 0.0,
            Modulation::Custom(_) => false,
        }
    }

    /// Samples `[0, horizon]` for non-finite values and jump discontinuities.
    fn check_on(&self, horizon: f64) -> Result<()> {
        const GRID: usize = 1000;
        let h = horizon / GRID as f64;
        let mut prev = self.at(0.0);
        for k in 0..=GRID {
            let t = k as f64 * h;
            let v = self.at(t);
            if !v.is_finite() {
                return Err(Error::NonFinite("schedule coefficient sample"));
            }
            if k > 0 && matches!(self, Modulation::Custom(_)) {
                // a jump keeps its size under refinement, a continuous function shrinks
                let coarse = (v - prev).abs();
                let mid = self.at(t - 0.5 * h);
                let fine = (v - mid).abs().max((mid - prev).abs());
                if coarse > 1e-6 * (1.0 + v.abs()) && fine > 0.9 * coarse {
                    return Err(Error::InvalidArgument(format!(
                        "schedule coefficient looks discontinuous near t = {t:.6}"
                    )));
                }
            }
            prev = v;
        }
        Ok(())
    }
}

/// One summand `f(t) · L` of a time-dependent generator.
#[derive(Debug, Clone)]
pub struct ScheduleTerm {
    pub generator: Liouvillian,
    pub modulation: Modulation,
}

/// Time-dependent generator `L_t = Σ_k f_k(t) L_k` on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct Schedule {
    basis: FockBasis,
    terms: Vec<ScheduleTerm>,
    horizon: f64,
}

impl Schedule {
    pub fn new(basis: &FockBasis, horizon: f64, terms: Vec<ScheduleTerm>) -> Result<Self> {
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidArgument(format!("schedule horizon {horizon} must be finite and ≥ 0")));
        }
        for term in &terms {
            if term.generator.basis() != basis {
                return Err(Error::BasisMismatch);
            }
            term.modulation.check_on(horizon)?;
        }
        Ok(Self { basis: basis.clone(), terms, horizon })
    }

    /// Constant generator on `[0, horizon]`.
    pub fn autonomous(l: &Liouvillian, horizon: f64) -> Result<Self> {
        Self::new(
            l.basis(),
            horizon,
            vec![ScheduleTerm { generator: l.clone(), modulation: Modulation::constant(1.0) }],
        )
    }

    pub fn zero(basis: &FockBasis, horizon: f64) -> Result<Self> {
        Self::new(basis, horizon, Vec::new())
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terms(&self) -> &[ScheduleTerm] {
        &self.terms
    }

    pub fn is_autonomous(&self) -> bool {
        self.terms.iter().all(|t| t.modulation.is_constant())
    }

    pub fn is_reversible(&self) -> bool {
        self.terms.iter().all(|t| t.generator.is_pure_commutator())
    }

    /// Concatenates the terms of two schedules; the horizon is the shorter one.
    pub fn sum(&self, other: &Schedule) -> Result<Schedule> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch);
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(Schedule { basis: self.basis.clone(), terms, horizon: self.horizon.min(other.horizon) })
    }

    pub fn check_window(&self, t0: f64, t1: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon.max(1.0);
        for t in [t0, t1] {
            if !(t >= -slack && t <= self.horizon + slack) {
                return Err(Error::OutsideHorizon { t, horizon: self.horizon });
            }
        }
        if t1 < t0 {
            return Err(Error::InvalidArgument(format!("evolution window [{t0}, {t1}] runs backwards")));
        }
        Ok(())
    }

    /// The frozen generator `L_t` in GKSL form. Dissipative terms need a
    /// non-negative coefficient.
    pub fn generator_at(&self, t: f64) -> Result<Liouvillian> {
        let d = self.basis.total_dim();
        let mut h: Option<CMat> = None;
        let mut jumps = Vec::new();
        for term in &self.terms {
            let f = term.modulation.at(t);
            if let Some(hk) = term.generator.hamiltonian_matrix() {
                let acc = h.get_or_insert_with(|| CMat::zeros(d, d));
                *acc += hk * C64::new(f, 0.0);
            }
            for l in term.generator.jump_matrices() {
                if f < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "dissipative schedule term has negative coefficient {f} at t = {t}"
                    )));
                }
                jumps.push(Operator::from_matrix_unchecked(&self.basis, l * C64::new(f.sqrt(), 0.0)));
            }
        }
        let h = h.map(|m| Operator::from_matrix_unchecked(&self.basis, m));
        gksl(&self.basis, h.as_ref(), &jumps)
    }

    /// `L_t(x)`.
    pub fn apply_at(&self, t: f64, x: &CMat) -> CMat {
        let d = x.nrows();
        let mut out = CMat::zeros(d, d);
        for term in &self.terms {
            let f = term.modulation.at(t);
            if f != 0.0 {
                out += term.generator.apply(x) * C64::new(f, 0.0);
            }
        }
        out
    }

    pub fn norm_bound_at(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.modulation.at(t).abs() * term.generator.norm_bound()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::number_operator;
    use crate::liouville::commutator_generator;

    #[test]
    fn modulation_integrals_match_quadrature() {
        let mods = [
            Modulation::constant(2.0),
            Modulation::Cos { amplitude: 1.5, frequency: 2.0, phase: 0.3 },
            Modulation::Sin { amplitude: 0.5, frequency: 3.0, phase: -1.0 },
            Modulation::Linear { offset: 1.0, slope: -0.5 },
        ];
        for m in &mods {
            let n = 20_000;
            let (a, b) = (0.2, 1.7);
            let h = (b - a) / n as f64;
            let quad: f64 = (0..n).map(|k| m.at(a + (k as f64 + 0.5) * h) * h).sum();
            assert!((quad - m.integral(a, b).unwrap()).abs() < 1e-8, "{m:?}");
        }
    }

    #[test]
    fn modulation_toml_round_trip() {
        let m: Modulation = toml::from_str("kind = \"cos\"\nfrequency = 2.0").unwrap();
        assert_eq!(m, Modulation::Cos { amplitude: 1.0, frequency: 2.0, phase: 0.0 });
        assert!(toml::from_str::<Modulation>("kind = \"tan\"").is_err());
    }

    #[test]
    fn discontinuous_or_non_finite_coefficients_rejected() {
        let b = FockBasis::single_mode(3).unwrap();
        let l = commutator_generator(&number_operator(&b, 0).unwrap()).unwrap();
        let step = ScheduleTerm { generator: l.clone(), modulation: Modulation::custom(|t| if t < 0.5 { 0.0 } else { 1.0 }) };
        assert!(Schedule::new(&b, 1.0, vec![step]).is_err());
        let blow = ScheduleTerm { generator: l.clone(), modulation: Modulation::custom(|t| 1.0 / (t - 0.5)) };
        assert!(Schedule::new(&b, 1.0, vec![blow]).is_err());
        let smooth = ScheduleTerm { generator: l, modulation: Modulation::custom(|t| (3.0 * t).exp()) };
        assert!(Schedule::new(&b, 1.0, vec![smooth]).is_ok());
    }

    #[test]
    fn frozen_generator_matches_action() {
        let b = FockBasis::single_mode(4).unwrap();
        let n = number_operator(&b, 0).unwrap();
        let l = commutator_generator(&n).unwrap();
        let s = Schedule::new(&b, 2.0, vec![ScheduleTerm { generator: l, modulation: Modulation::cos() }]).unwrap();
        let x = CMat::from_fn(4, 4, |r, c| C64::new((r + 2 * c) as f64, r as f64 - c as f64));
        let frozen = s.generator_at(0.9).unwrap();
        let diff = frozen.apply(&x) - s.apply_at(0.9, &x);
        assert!(crate::linalg::max_abs(&diff) < 1e-13);
        assert!(s.check_window(0.0, 2.5).is_err());
        assert!(s.check_window(1.0, 0.5).is_err());
    }
}
