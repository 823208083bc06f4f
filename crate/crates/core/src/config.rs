//! Declarative experiment descriptions (TOML) and their validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, FockBasis, Operator, Parity};
use crate::linalg::C64;
use crate::liouville::{commutator_generator, gksl, DensityOperator, Liouvillian};
use crate::models::{self, PolynomialSpec};
use crate::propagators::{Schedule, ScheduleTerm, Modulation, ORACLE_TOL};
use crate::schemes::{Partition, SplittingScheme};

/// Dense operators beyond this size do not fit in memory as superoperators.
pub const MAX_TOTAL_DIM: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    TrotterSweep,
    SuzukiSweep,
    TimeDepTrotter,
    ZenoSweep,
    GeneralZeno,
    GateFidelity,
    Diagnostics,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::TrotterSweep => "trotter-sweep",
            ExperimentKind::SuzukiSweep => "suzuki-sweep",
            ExperimentKind::TimeDepTrotter => "time-dep-trotter",
            ExperimentKind::ZenoSweep => "zeno-sweep",
            ExperimentKind::GeneralZeno => "general-zeno",
            ExperimentKind::GateFidelity => "gate-fidelity",
            ExperimentKind::Diagnostics => "diagnostics",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub cutoffs: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateConfig {
    Fock {
        occupations: Vec<usize>,
    },
    /// Product coherent state; one `[re, im]` per mode.
    Coherent {
        alphas: Vec<[f64; 2]>,
    },
    Cat {
        #[serde(default)]
        mode: usize,
        alpha: [f64; 2],
        parity: Parity,
    },
    MaximallyMixed,
    /// JSON density file, relative to the config file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Trotter,
    Strang,
    Suzuki,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionKind {
    #[default]
    Uniform,
    Graded,
}

fn default_grading() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub t: f64,
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    /// Suzuki order (even, ≥ 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default)]
    pub partition: PartitionKind,
    /// Exponent of the graded partition `s_j = t (j/n)^grading`.
    #[serde(default = "default_grading")]
    pub grading: f64,
    /// Also compute the per-step defects of the product.
    #[serde(default = "yes")]
    pub telescopic: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    #[serde(default)]
    pub mode: usize,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LPhotonParams {
    #[serde(default)]
    pub mode: usize,
    pub l: u32,
    pub alpha: [f64; 2],
}

/// `ω · (|C+⟩⟨C−| + |C−⟩⟨C+|)` as a Hamiltonian.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeFlipParams {
    #[serde(default)]
    pub mode: usize,
    pub alpha: [f64; 2],
    pub omega: f64,
}

/// A generator as the sum of its listed parts.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<PolynomialSpec>,
    /// Jump operators; coefficient functions are not allowed here.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<PolynomialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ou: Option<OuParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_photon: Option<LPhotonParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_flip: Option<CodeFlipParams>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<GeneratorSpec>,
}

fn default_n_check() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoConfig {
    #[serde(default)]
    pub mode: usize,
    /// Cat amplitude of the code space.
    pub alpha: [f64; 2],
    /// Contraction rate of a general measurement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default = "default_n_check")]
    pub n_check: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
}

/// `tr[W_k L(x)] ≤ −damping · tr[W_{damping_k} x] + c`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub k: f64,
    pub damping: f64,
    pub damping_k: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodeDecayConfig {
    #[serde(default)]
    pub mode: usize,
    pub l: u32,
    pub alpha: [f64; 2],
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moment: Option<MomentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_decay: Option<CodeDecayConfig>,
    #[serde(default)]
    pub stationary: bool,
}

fn default_oracle_tol() -> f64 {
    ORACLE_TOL
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    /// Record wall-clock times; off gives byte-identical result files.
    #[serde(default = "yes")]
    pub timing: bool,
    pub basis: BasisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub generators: GeneratorsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeno: Option<ZenoConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsConfig>,
    /// Directory that relative state files resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Any construction failure is a schema problem of the config.
fn in_config<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| if e.is_validation() { e } else { config_err(format!("{what}: {e}")) })
}

fn complex(z: [f64; 2]) -> C64 {
    C64::new(z[0], z[1])
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { what: "experiment config", message: e.to_string() })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Builds every object the run needs; all failures are config errors.
    pub fn validate(&self) -> Result<()> {
        self.prepare().map(|_| ())
    }

    pub fn basis(&self) -> Result<FockBasis> {
        let basis = in_config("basis", FockBasis::new(self.basis.cutoffs.clone()))?;
        if basis.total_dim() > MAX_TOTAL_DIM {
            return Err(config_err(format!(
                "total dimension {} exceeds the limit of {MAX_TOTAL_DIM}",
                basis.total_dim()
            )));
        }
        Ok(basis)
    }

    fn require_sweep(&self) -> Result<&SweepConfig> {
        let sweep = self.sweep.as_ref().ok_or_else(|| config_err(format!("kind {} needs a [sweep] table", self.kind.as_str())))?;
        if !(sweep.t.is_finite() && sweep.t > 0.0) {
            return Err(config_err(format!("sweep time t = {} must be finite and positive", sweep.t)));
        }
        if sweep.n.len() < 3 {
            return Err(config_err(format!(
                "n-grid needs at least 3 entries for an order fit, found {}",
                sweep.n.len()
            )));
        }
        if sweep.n[0] == 0 || sweep.n.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err("n-grid must be strictly increasing positive integers"));
        }
        if sweep.partition == PartitionKind::Graded && !(sweep.grading.is_finite() && sweep.grading > 0.0) {
            return Err(config_err(format!("grading exponent {} must be positive", sweep.grading)));
        }
        Ok(sweep)
    }

    fn require_generator(&self, slot: &str) -> Result<&GeneratorSpec> {
        let g = match slot {
            "a" => self.generators.a.as_ref(),
            _ => self.generators.b.as_ref(),
        };
        g.ok_or_else(|| config_err(format!("kind {} needs [generators.{slot}]", self.kind.as_str())))
    }

    fn require_zeno(&self) -> Result<&ZenoConfig> {
        self.zeno.as_ref().ok_or_else(|| config_err(format!("kind {} needs a [zeno] table", self.kind.as_str())))
    }

    pub fn initial_state(&self, basis: &FockBasis) -> Result<DensityOperator> {
        let state = self.state.as_ref().ok_or_else(|| config_err("missing [state] table"))?;
        let rho = match state {
            StateConfig::Fock { occupations } => DensityOperator::fock(basis, occupations),
            StateConfig::Coherent { alphas } => {
                let alphas: Vec<C64> = alphas.iter().copied().map(complex).collect();
                fock::coherent_state(basis, &alphas).map(|c| DensityOperator::from_ket(&c.ket))
            }
            StateConfig::Cat { mode, alpha, parity } => {
                fock::cat_state(basis, *mode, complex(*alpha), *parity).map(|k| DensityOperator::from_ket(&k))
            }
            StateConfig::MaximallyMixed => Ok(DensityOperator::maximally_mixed(basis)),
            StateConfig::File { path } => {
                let full = match &self.base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| config_err(format!("state file {}: {e}", full.display())))?;
                let rho = DensityOperator::from_json_str(&text)?;
                if rho.basis() != basis {
                    return Err(config_err("state file basis differs from [basis]"));
                }
                Ok(rho)
            }
        };
        in_config("initial state", rho)
    }

    pub(crate) fn scheme(&self) -> Result<SplittingScheme> {
        let sweep = self.require_sweep()?;
        let kind = sweep.scheme.unwrap_or(match self.kind {
            ExperimentKind::SuzukiSweep => SchemeKind::Suzuki,
            _ => SchemeKind::Trotter,
        });
        if self.kind == ExperimentKind::SuzukiSweep && kind != SchemeKind::Suzuki {
            return Err(config_err("suzuki-sweep requires scheme = \"suzuki\""));
        }
        match kind {
            SchemeKind::Trotter => Ok(SplittingScheme::trotter()),
            SchemeKind::Strang => Ok(SplittingScheme::strang()),
            SchemeKind::Suzuki => {
                let order = sweep.order.ok_or_else(|| config_err("scheme suzuki needs an order"))?;
                in_config("scheme", SplittingScheme::suzuki(order))
            }
        }
    }

    pub(crate) fn partition(&self, n: usize) -> Result<Partition> {
        let sweep = self.require_sweep()?;
        match sweep.partition {
            PartitionKind::Uniform => Partition::uniform(0.0, sweep.t, n),
            PartitionKind::Graded => Partition::graded(0.0, sweep.t, n, sweep.grading),
        }
    }

    /// Checks cross-field requirements and builds the run inputs.
    pub(crate) fn prepare(&self) -> Result<Prepared> {
        if self.name.trim().is_empty() {
            return Err(config_err("name must be non-empty"));
        }
        if self.name.contains(['/', '\\']) {
            return Err(config_err("name must not contain path separators"));
        }
        if !(self.oracle_tol >= 1e-13 && self.oracle_tol <= 1e-6) {
            return Err(config_err(format!("oracle_tol {} must lie in [1e-13, 1e-6]", self.oracle_tol)));
        }
        let basis = self.basis()?;
        let mut prepared = Prepared { basis: basis.clone(), state: None, a: None, b: None };
        match self.kind {
            ExperimentKind::TrotterSweep | ExperimentKind::SuzukiSweep => {
                let sweep = self.require_sweep()?;
                let scheme = self.scheme()?;
                let a = in_config("generator a", self.require_generator("a")?.liouvillian(&basis))?;
                let b = in_config("generator b", self.require_generator("b")?.liouvillian(&basis))?;
                if scheme.is_reversible_only() && !(a.is_pure_commutator() && b.is_pure_commutator()) {
                    return Err(config_err(format!("{} needs Hamiltonian-only generators", scheme.name())));
                }
                if sweep.partition == PartitionKind::Graded {
                    for &n in &sweep.n {
                        in_config("partition", self.partition(n))?;
                    }
                }
                prepared.a = Some(Schedule::autonomous(&a, sweep.t)?);
                prepared.b = Some(Schedule::autonomous(&b, sweep.t)?);
            }
            ExperimentKind::TimeDepTrotter => {
                let sweep = self.require_sweep()?;
                prepared.a = Some(in_config("generator a", self.require_generator("a")?.schedule(&basis, sweep.t))?);
                prepared.b = Some(in_config("generator b", self.require_generator("b")?.schedule(&basis, sweep.t))?);
                for &n in &sweep.n {
                    in_config("partition", self.partition(n))?;
                }
            }
            ExperimentKind::ZenoSweep | ExperimentKind::GeneralZeno => {
                let sweep = self.require_sweep()?;
                let zeno = self.require_zeno()?;
                in_config("code projector", models::cat_projector(&basis, zeno.mode, complex(zeno.alpha)))?;
                if self.kind == ExperimentKind::GeneralZeno {
                    let delta = zeno.delta.ok_or_else(|| config_err("general-zeno needs zeno.delta"))?;
                    if !(0.0..1.0).contains(&delta) {
                        return Err(config_err(format!("zeno.delta = {delta} must lie in [0, 1)")));
                    }
                    if basis.total_dim() > 24 {
                        return Err(config_err("general-zeno flattens the measurement; total dimension must be ≤ 24"));
                    }
                    prepared.a = Some(in_config("generator a", self.require_generator("a")?.schedule(&basis, sweep.t))?);
                } else {
                    let a = in_config("generator a", self.require_generator("a")?.liouvillian(&basis))?;
                    prepared.a = Some(Schedule::autonomous(&a, sweep.t)?);
                }
            }
            ExperimentKind::GateFidelity => {
                self.require_sweep()?;
                let zeno = self.require_zeno()?;
                if self.generators.a.is_some() || self.generators.b.is_some() {
                    return Err(config_err("gate-fidelity fixes the drive a + a†; remove [generators]"));
                }
                in_config("code projector", models::cat_projector(&basis, zeno.mode, complex(zeno.alpha)))?;
            }
            ExperimentKind::Diagnostics => {
                let diag = self.diagnostics.as_ref().ok_or_else(|| config_err("diagnostics needs a [diagnostics] table"))?;
                let a = in_config("generator a", self.require_generator("a")?.liouvillian(&basis))?;
                if let Some(d) = &diag.code_decay {
                    if d.times.len() < 3 || d.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                        return Err(config_err("code_decay.times needs at least 3 finite non-negative times"));
                    }
                    if d.times.windows(2).any(|w| w[1] <= w[0]) {
                        return Err(config_err("code_decay.times must be strictly increasing"));
                    }
                    in_config("code jump", models::code_jump(&basis, d.mode, d.l, complex(d.alpha)))?;
                }
                if let Some(m) = &diag.moment {
                    if !(m.k.is_finite() && m.k >= 0.0) {
                        return Err(config_err("moment.k must be finite and non-negative"));
                    }
                }
                if let Some(d) = &diag.drift {
                    if ![d.k, d.damping, d.damping_k].iter().all(|v| v.is_finite() && *v >= 0.0) {
                        return Err(config_err("drift parameters must be finite and non-negative"));
                    }
                }
                prepared.a = Some(Schedule::autonomous(&a, 0.0)?);
            }
        }
        if self.kind != ExperimentKind::Diagnostics || self.state.is_some() {
            prepared.state = Some(self.initial_state(&basis)?);
        }
        Ok(prepared)
    }
}

/// Inputs built from a validated config.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub basis: FockBasis,
    pub state: Option<DensityOperator>,
    pub a: Option<Schedule>,
    pub b: Option<Schedule>,
}

impl GeneratorSpec {
    fn constant_parts(&self, basis: &FockBasis) -> Result<Liouvillian> {
        let mut jumps = Vec::with_capacity(self.jumps.len());
        for j in &self.jumps {
            if j.is_time_dependent() {
                return Err(config_err("jump operators cannot carry coefficient functions"));
            }
            jumps.push(models::build_operator(j, basis, 0.0)?);
        }
        let mut l = gksl(basis, None, &jumps)?;
        if let Some(ou) = &self.ou {
            l = l.sum(&models::ou_generator(basis, ou.mode, ou.lambda, ou.mu)?)?;
        }
        if let Some(lp) = &self.l_photon {
            l = l.sum(&models::l_photon_dissipation(basis, lp.mode, lp.l, complex(lp.alpha))?)?;
        }
        if let Some(cf) = &self.code_flip {
            let x = models::cat_logical_x(basis, cf.mode, complex(cf.alpha))?;
            l = l.sum(&commutator_generator(&x.scale(C64::new(cf.omega, 0.0)))?)?;
        }
        Ok(l)
    }

    pub fn is_empty(&self) -> bool {
        self.hamiltonian.as_ref().is_none_or(PolynomialSpec::is_empty)
            && self.jumps.is_empty()
            && self.ou.is_none()
            && self.l_photon.is_none()
            && self.code_flip.is_none()
    }

    /// The autonomous generator; coefficient functions are rejected.
    pub fn liouvillian(&self, basis: &FockBasis) -> Result<Liouvillian> {
        let mut l = self.constant_parts(basis)?;
        if let Some(h) = &self.hamiltonian {
            if h.is_time_dependent() {
                return Err(config_err("this experiment kind needs time-independent coefficients"));
            }
            if !h.is_empty() {
                let op: Operator = models::build_hamiltonian(h, basis)?;
                l = l.sum(&commutator_generator(&op)?)?;
            }
        }
        Ok(l)
    }

    /// The generator as a schedule on `[0, horizon]`.
    pub fn schedule(&self, basis: &FockBasis, horizon: f64) -> Result<Schedule> {
        let constant = self.constant_parts(basis)?;
        let mut terms = Vec::new();
        if !constant.is_zero() {
            terms.push(ScheduleTerm { generator: constant, modulation: Modulation::constant(1.0) });
        }
        let base = Schedule::new(basis, horizon, terms)?;
        match &self.hamiltonian {
            Some(h) if !h.is_empty() => base.sum(&models::schedule_from_spec(h, basis, horizon)?),
            _ => Ok(base),
        }
    }
}
