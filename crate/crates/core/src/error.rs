use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode {mode} out of range for a {modes}-mode basis")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("invalid Fock basis: {0}")]
    InvalidBasis(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operators act on different Fock bases")]
    BasisMismatch,

    #[error("truncation tail mass {tail_mass:.3e} exceeds guard {threshold:.3e}; raise the cutoff")]
    TruncationGuard { tail_mass: f64, threshold: f64 },

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("projector is not idempotent (defect {defect:.3e})")]
    NotIdempotent { defect: f64 },

    #[error("flattened dimension {dim} exceeds the dense limit {limit}; use action-form propagation")]
    DenseLimitExceeded { dim: usize, limit: usize },

    #[error("negative time {t} requested for a dissipative generator")]
    NegativeTimeDissipative { t: f64 },

    #[error("scheme has backward steps and needs reversible (pure commutator) generators")]
    ReversibleOnly,

    #[error("step size underflow in reference evolution; last accepted time {t_reached}")]
    StepSizeUnderflow { t_reached: f64 },

    #[error("non-finite values in {0}")]
    NonFinite(&'static str),

    #[error("only {usable} usable points for an order fit (need at least 3)")]
    InsufficientPoints { usable: usize },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid splitting scheme: {0}")]
    InvalidScheme(String),

    #[error("map is not contractive on the orbit (norm grew by {growth:.3e} at step {step})")]
    NotContractive { step: usize, growth: f64 },

    #[error("mixer leaks into the range of the projection (leak {leak:.3e})")]
    MixerLeak { leak: f64 },

    #[error("uniform power convergence fails at n = {n}: ‖Mⁿ − P‖ = {norm:.3e} > δⁿ = {bound:.3e}")]
    PowerConvergence { n: usize, norm: f64, bound: f64 },

    #[error("state support reaches level {level} in mode {mode}; admissible levels end at {max_level}")]
    SupportViolation { mode: usize, level: usize, max_level: usize },

    #[error("state is not positive semi-definite (minimum eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },

    #[error("invalid polynomial specification: {0}")]
    InvalidPolynomial(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time {t} outside schedule horizon [0, {horizon}]")]
    OutsideHorizon { t: f64, horizon: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("failed to parse {what}: {message}")]
    Parse { what: &'static str, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by user input (config or file schema), as
    /// opposed to numerical failures during a run.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. })
    }
}
