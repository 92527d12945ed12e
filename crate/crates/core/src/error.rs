use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("time {0} is outside [0, 1]")]
    TimeOutOfRange(f64),

    #[error("non-finite gradient in parameter block `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at t = {t}, gamma = {gamma}")]
    NonFiniteLoss { t: f64, gamma: f64 },

    #[error("non-finite drift at t = {t} (gamma = {gamma}, epsilon = {epsilon})")]
    NonFiniteDrift { t: f64, gamma: f64, epsilon: f64 },

    #[error("non-finite sampler state at step {step}")]
    NonFiniteState { step: usize },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("NaN loss at epoch {epoch}; last finite epoch {last_finite_epoch:?}")]
    NanLoss {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },

    #[error("source policy not trained")]
    SourceNotTrained,

    #[error("sample sets differ in size ({left} vs {right}); subsample upstream to equal size")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("q has zero mass at index {index} where p = {p}")]
    UnsupportedCrossEntropy { index: usize, p: f64 },

    #[error("infeasible improvement chain at step {step}: remaining gap {gap}; achievable steps {achievable_steps}")]
    InfeasibleChain {
        step: usize,
        gap: f64,
        achievable_steps: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
