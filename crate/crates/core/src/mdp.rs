//! State, action and transition types, the environment contract, and the
//! conjugate (time-reversal) involution.
//!
//! A state is split into a configuration block `q` and a velocity block `p`.
//! The involution leaves `q` alone and flips the sign of selected velocity
//! components, `f(q, p) = (q, -p)`. Actions are unchanged under reversal, so a
//! transition `(s, a, s')` maps to `(f(s'), a, f(s))` with the reward
//! re-evaluated at the new arrival state `f(s)`.

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub config: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl StateVector {
    pub fn new(config: Vec<f64>, velocity: Vec<f64>) -> Result<Self> {
        if config.len() != velocity.len() {
            return Err(Error::contract(format!(
                "config has {} entries but velocity has {}",
                config.len(),
                velocity.len()
            )));
        }
        Ok(Self { config, velocity })
    }

    /// Splits `[q.., p..]` in half.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if !flat.len().is_multiple_of(2) {
            return Err(Error::contract(format!(
                "flat state of odd length {}",
                flat.len()
            )));
        }
        let n = flat.len() / 2;
        Ok(Self {
            config: flat[..n].to_vec(),
            velocity: flat[n..].to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.dof());
        v.extend_from_slice(&self.config);
        v.extend_from_slice(&self.velocity);
        v
    }

    /// Number of degrees of freedom (length of each block).
    pub fn dof(&self) -> usize {
        self.config.len()
    }

    pub fn is_finite(&self) -> bool {
        self.config.iter().chain(&self.velocity).all(|x| x.is_finite())
    }

    /// Largest absolute componentwise difference over both blocks.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.config
            .iter()
            .zip(&other.config)
            .chain(self.velocity.iter().zip(&other.velocity))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Normalized actuator command. Components live in `[-1, 1]`; environments
/// scale them by their own torque or force limits.
#[derive(Debug, Clone, PartialEq)]
pub struct Action(pub Vec<f64>);

impl Action {
    pub fn zeros(dim: usize) -> Self {
        Action(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Clamps every component into `[-1, 1]`. NaN becomes 0.
    pub fn clamped(&self) -> Action {
        Action(
            self.0
                .iter()
                .map(|&x| if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
}

/// Sign mask applied to the velocity block. Entries are exactly `+1.0` or
/// `-1.0`, so applying the mask twice is bitwise the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Involution {
    velocity_sign_mask: Vec<f64>,
}

impl Involution {
    pub fn new(velocity_sign_mask: Vec<f64>) -> Result<Self> {
        if let Some(bad) = velocity_sign_mask
            .iter()
            .find(|&&m| m != 1.0 && m != -1.0)
        {
            return Err(Error::contract(format!(
                "involution mask entries must be +1 or -1, got {bad}"
            )));
        }
        Ok(Self { velocity_sign_mask })
    }

    /// Time reversal: negate every velocity component.
    pub fn time_reversal(dof: usize) -> Self {
        Self {
            velocity_sign_mask: vec![-1.0; dof],
        }
    }

    pub fn mask(&self) -> &[f64] {
        &self.velocity_sign_mask
    }
}

pub fn conjugate_state(s: &StateVector, inv: &Involution) -> Result<StateVector> {
    if inv.velocity_sign_mask.len() != s.velocity.len() {
        return Err(Error::contract(format!(
            "involution mask has {} entries, velocity block has {}",
            inv.velocity_sign_mask.len(),
            s.velocity.len()
        )));
    }
    Ok(StateVector {
        config: s.config.clone(),
        velocity: s
            .velocity
            .iter()
            .zip(&inv.velocity_sign_mask)
            .map(|(v, m)| v * m)
            .collect(),
    })
}

/// Actions are invariant under time reversal. Kept as a function so an
/// involution with `a+ != a` only needs to change here.
pub fn conjugate_action(a: &Action) -> Action {
    a.clone()
}

/// Time-reversed counterpart of `t`: `(f(s'), a, f(s))` with the reward
/// recomputed at `f(s)`. Always non-terminal.
pub fn conjugate_transition(t: &Transition, env: &dyn Environment) -> Result<Transition> {
    let inv = &env.descriptor().involution;
    let state = conjugate_state(&t.next_state, inv)?;
    let next_state = conjugate_state(&t.state, inv)?;
    if !state.is_finite() || !next_state.is_finite() {
        return Err(Error::SimulationDiverged {
            state: t.next_state.to_flat(),
        });
    }
    Ok(Transition {
        state,
        action: conjugate_action(&t.action),
        reward: env.reward(&next_state),
        next_state,
        terminal: false,
    })
}

#[derive(Debug, Clone)]
pub struct EnvDescriptor {
    pub name: String,
    /// Degrees of freedom; the flat state has `2 * dof` entries.
    pub dof: usize,
    pub action_dim: usize,
    /// Control interval in seconds.
    pub dt: f64,
    pub episode_length: usize,
    pub involution: Involution,
    /// Episodic return at which the task counts as solved.
    pub solve_threshold: f64,
}

impl EnvDescriptor {
    pub fn state_dim(&self) -> usize {
        2 * self.dof
    }

    /// Per-step reward is bounded by one, so this is also the maximum return.
    pub fn max_return(&self) -> f64 {
        self.episode_length as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next: StateVector,
    pub reward: f64,
    pub terminal: bool,
}

/// A deterministic control task. Implementations are stateless: the caller
/// owns the current state and threads it through [`Environment::step`].
pub trait Environment: Send + Sync {
    fn descriptor(&self) -> &EnvDescriptor;

    /// Sample from the initial-state distribution.
    fn reset(&self, rng: &mut RngStream) -> StateVector;

    /// Integrate one control interval under an already clamped action.
    fn advance(&self, s: &StateVector, a: &Action) -> Result<StateVector>;

    /// Reward of arriving in `s`, in `[0, 1]`.
    fn reward(&self, s: &StateVector) -> f64;

    /// Network input features for `s`.
    fn observe(&self, s: &StateVector) -> Vec<f64>;

    fn observation_dim(&self) -> usize;

    fn is_terminal(&self, _s: &StateVector) -> bool {
        false
    }

    /// One environment step: clamp, integrate, score.
    fn step(&self, s: &StateVector, a: &Action) -> Result<StepOutcome> {
        let desc = self.descriptor();
        if s.dof() != desc.dof || a.dim() != desc.action_dim {
            return Err(Error::contract(format!(
                "{}: expected dof {} / action dim {}, got {} / {}",
                desc.name,
                desc.dof,
                desc.action_dim,
                s.dof(),
                a.dim()
            )));
        }
        let next = self.advance(s, &a.clamped())?;
        if !next.is_finite() {
            return Err(Error::SimulationDiverged {
                state: next.to_flat(),
            });
        }
        let reward = self.reward(&next);
        let terminal = self.is_terminal(&next);
        Ok(StepOutcome {
            next,
            reward,
            terminal,
        })
    }
}
