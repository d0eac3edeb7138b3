//! Configuration, training and evaluation loops, seed sweeps, metrics files.

pub mod config;
pub mod metrics;
pub mod sweep;
pub mod train;

pub use config::{load_config, parse_config, RunConfig};
pub use metrics::{load_metrics, save_metrics, solved_at, MetricsRow};
pub use sweep::{paired_sweep, sweep_seeds, ArmReport};
pub use train::{evaluate_policy, train_run, RunOutcome};
