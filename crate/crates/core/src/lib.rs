//! Time-reversal symmetry for Markov decision processes.
//!
//! The crate has three layers:
//!
//! * [`mdp`], [`dynamics`] and [`envs`]: states, the velocity-flip
//!   involution, reversible integrators and the benchmark tasks.
//! * [`reversibility`]: exact checks of detailed balance, dynamic
//!   reversibility and action reversibility on finite chains.
//! * [`tsda`], [`learner`] and [`harness`]: a replay buffer that stores the
//!   time-reversed twin of every transition, soft actor-critic, and the
//!   training, evaluation and sweep drivers behind the `revrl` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod envs;
pub mod error;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod reversibility;
pub mod rng;
pub mod tsda;

pub use error::{Error, Result};
pub use mdp::{conjugate_action, conjugate_state, conjugate_transition, Action, EnvDescriptor, Environment, Involution, StateVector, Transition};
pub use rng::RngStream;
