use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("simulation diverged: non-finite value at step {step}")]
    Divergence { step: usize },

    #[error("simulation diverged in epoch {epoch}, batch {batch} (sub-sequence starting at {start}, step {step})")]
    BatchDivergence {
        epoch: usize,
        batch: usize,
        start: usize,
        step: usize,
    },

    #[error("non-finite loss in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite input at sample {0}")]
    NonFiniteInput(usize),

    #[error("multisine band [{lo}, {hi}] Hz contains no frequency bins")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("precision matrix not positive definite after jitter (smallest eigenvalue estimate {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("posterior does not match model: {0}")]
    PosteriorMismatch(String),

    #[error("FIT undefined (zero variance)")]
    ZeroVariance,

    #[error("undefined surprise (zero nominal energy)")]
    ZeroNominalEnergy,

    #[error("sequence too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
}
