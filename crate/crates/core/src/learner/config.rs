use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
}

/// Soft actor-critic hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub batch_size: usize,
    pub discount: f64,
    pub critic_lr: f64,
    pub actor_lr: f64,
    pub critic_target_updates_per_env_step: usize,
    pub actor_updates_per_env_step: usize,
    pub q_soft_update_rate: f64,
    pub actor_log_std_bounds: [f64; 2],
    pub temperature_lr: f64,
    pub temperature_adam_beta1: f64,
    pub initial_temperature: f64,
    pub optimizer: Optimizer,
    /// Hidden layer widths shared by the actor and both critics.
    pub hidden_sizes: Vec<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            discount: 0.99,
            critic_lr: 1e-3,
            actor_lr: 1e-3,
            critic_target_updates_per_env_step: 2,
            actor_updates_per_env_step: 2,
            q_soft_update_rate: 0.01,
            actor_log_std_bounds: [-10.0, 2.0],
            temperature_lr: 1e-4,
            temperature_adam_beta1: 0.5,
            initial_temperature: 0.1,
            optimizer: Optimizer::Adam,
            hidden_sizes: vec![256, 256],
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: &str| Err(Error::config(format!("learner.{key}"), msg));
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("discount", "must lie in (0, 1)");
        }
        if !(self.q_soft_update_rate > 0.0 && self.q_soft_update_rate <= 1.0) {
            return bad("q_soft_update_rate", "must lie in (0, 1]");
        }
        for (key, lr) in [
            ("critic_lr", self.critic_lr),
            ("actor_lr", self.actor_lr),
            ("temperature_lr", self.temperature_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(key, "must be positive");
            }
        }
        if !(0.0..1.0).contains(&self.temperature_adam_beta1) {
            return bad("temperature_adam_beta1", "must lie in [0, 1)");
        }
        if !(self.initial_temperature > 0.0 && self.initial_temperature.is_finite()) {
            return bad("initial_temperature", "must be positive");
        }
        let [lo, hi] = self.actor_log_std_bounds;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return bad("actor_log_std_bounds", "need finite lower < upper");
        }
        if self.critic_target_updates_per_env_step == 0 && self.actor_updates_per_env_step == 0 {
            return bad("actor_updates_per_env_step", "at least one update kind must run");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes", "widths must be positive");
        }
        Ok(())
    }
}
