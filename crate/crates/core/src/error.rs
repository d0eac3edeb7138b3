use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape, range, involution).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The integrator produced a non-finite value.
    #[error("simulation diverged at state {state:?}")]
    SimulationDiverged { state: Vec<f64> },

    /// A non-finite loss or parameter appeared during a learner update.
    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("no unique stationary distribution: {0}")]
    NoUniqueStationary(String),

    /// Not enough stored transitions to draw the requested batch.
    #[error("replay buffer not ready: {size} stored, {requested} requested")]
    NotReady { size: usize, requested: usize },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown environment `{0}`")]
    UnknownEnv(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// True for the two divergence kinds that abort a training seed.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::SimulationDiverged { .. } | Error::TrainingDiverged(_)
        )
    }
}
