//! Soft actor-critic on a small hand-differentiated MLP.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod mlp;
pub mod policy;
pub mod sac;

pub use checkpoint::{load_policy, save_policy};
pub use config::LearnerConfig;
pub use mlp::{Mlp, MlpGrads};
pub use policy::Policy;
pub use sac::{actor_objective, critic_objective, critic_target, Batch, LossRecord, Sac};
