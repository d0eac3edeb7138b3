//! Particle on a ring lattice with quantized velocity: the smallest MDP that
//! satisfies the reversibility condition exactly.
//!
//! States are `(x, v)` with `x` on a ring of `2 * halfwidth` sites and
//! `v in {-2..2}`; actions are accelerations `a in {-2, 0, 2}`. Inside the
//! velocity range the update is the velocity-Verlet form
//! `v' = v + a`, `x' = x + v + a/2`, whose reverse from `(x', -v')` under the
//! same `a` is `(x, -v)`. An acceleration that would leave the range instead
//! reflects the particle's velocity in place, `(x, v) -> (x, -v)`, which is
//! also its own reverse. A saturating clamp would merge states and break the
//! condition, so it is not used.
//!
//! The breaking variant adds an absorbing crash state entered from `x = 0`
//! with `|v| = 2`.

use crate::error::{Error, Result};
use crate::mdp::{Action, EnvDescriptor, Environment, Involution, StateVector};
use crate::rng::RngStream;

use super::tabular::TabularMDP;
use super::EPISODE_LENGTH;

pub const MAX_SPEED: i64 = 2;
pub const ACCELERATIONS: [i64; 3] = [-2, 0, 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeState {
    pub x: i64,
    pub v: i64,
}

/// One deterministic step on a ring of `ring` sites.
pub fn lattice_step(s: LatticeState, a: i64, ring: i64) -> LatticeState {
    let w = s.v + a;
    if w.abs() <= MAX_SPEED {
        LatticeState {
            x: (s.x + s.v + a / 2).rem_euclid(ring),
            v: w,
        }
    } else {
        LatticeState { x: s.x, v: -s.v }
    }
}

fn is_crash_entry(s: LatticeState) -> bool {
    s.x == 0 && s.v.abs() == MAX_SPEED
}

fn velocity_count() -> usize {
    (2 * MAX_SPEED + 1) as usize
}

fn lattice_index(s: LatticeState) -> usize {
    s.x as usize * velocity_count() + (s.v + MAX_SPEED) as usize
}

fn lattice_state(idx: usize) -> LatticeState {
    let nv = velocity_count();
    LatticeState {
        x: (idx / nv) as i64,
        v: (idx % nv) as i64 - MAX_SPEED,
    }
}

/// Index of the zero acceleration in [`ACCELERATIONS`].
pub const COAST_ACTION: usize = 1;

/// Index of `(x = 0, v = 0)`, where episodes start.
pub const ORIGIN_INDEX: usize = MAX_SPEED as usize;

pub fn build_velocity_chain(halfwidth: usize, breaking: bool) -> Result<TabularMDP> {
    if halfwidth < 2 {
        return Err(Error::contract(format!("velocity chain needs halfwidth >= 2, got {halfwidth}")));
    }
    let ring = 2 * halfwidth as i64;
    let lattice = ring as usize * velocity_count();
    let crash = lattice;
    let n_states = if breaking { lattice + 1 } else { lattice };

    let kernel = ACCELERATIONS
        .iter()
        .map(|&a| {
            (0..n_states)
                .map(|s| {
                    let mut row = vec![0.0; n_states];
                    let target = if s == crash {
                        crash
                    } else {
                        let ls = lattice_state(s);
                        if breaking && is_crash_entry(ls) {
                            crash
                        } else {
                            lattice_index(lattice_step(ls, a, ring))
                        }
                    };
                    row[target] = 1.0;
                    row
                })
                .collect()
        })
        .collect();

    let state_involution = (0..n_states)
        .map(|s| {
            if s == crash {
                crash
            } else {
                let ls = lattice_state(s);
                lattice_index(LatticeState { x: ls.x, v: -ls.v })
            }
        })
        .collect();

    let reward = (0..n_states)
        .map(|s| if s != crash && lattice_state(s).x == 0 { 1.0 } else { 0.0 })
        .collect();

    let state_labels = (0..n_states)
        .map(|s| {
            if s == crash {
                "crash".to_string()
            } else {
                let ls = lattice_state(s);
                format!("({},{})", ls.x, ls.v)
            }
        })
        .collect();

    let mdp = TabularMDP {
        n_states,
        n_actions: ACCELERATIONS.len(),
        kernel,
        reward,
        state_involution,
        action_involution: (0..ACCELERATIONS.len()).collect(),
        state_labels,
        action_labels: ACCELERATIONS.iter().map(|a| a.to_string()).collect(),
    };
    mdp.validate()?;
    Ok(mdp)
}

/// The velocity chain as a continuous-interface environment. The scalar
/// action is quantized to the nearest acceleration.
#[derive(Debug, Clone)]
pub struct VelocityChain {
    halfwidth: usize,
    descriptor: EnvDescriptor,
}

impl VelocityChain {
    pub fn new(halfwidth: usize) -> Result<Self> {
        if halfwidth < 2 {
            return Err(Error::config("env.halfwidth", format!("must be >= 2, got {halfwidth}")));
        }
        Ok(Self {
            halfwidth,
            descriptor: EnvDescriptor {
                name: "velocity-chain".into(),
                dof: 1,
                action_dim: 1,
                dt: 1.0,
                episode_length: EPISODE_LENGTH,
                involution: Involution::time_reversal(1),
                solve_threshold: 500.0,
            },
        })
    }

    pub fn halfwidth(&self) -> usize {
        self.halfwidth
    }

    pub fn quantize(u: f64) -> i64 {
        if u < -1.0 / 3.0 {
            -2
        } else if u > 1.0 / 3.0 {
            2
        } else {
            0
        }
    }

    fn lattice(s: &StateVector) -> LatticeState {
        LatticeState {
            x: s.config[0].round() as i64,
            v: s.velocity[0].round() as i64,
        }
    }
}

impl Environment for VelocityChain {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&self, _rng: &mut RngStream) -> StateVector {
        StateVector {
            config: vec![0.0],
            velocity: vec![0.0],
        }
    }

    fn advance(&self, s: &StateVector, a: &Action) -> Result<StateVector> {
        let next = lattice_step(Self::lattice(s), Self::quantize(a.0[0]), 2 * self.halfwidth as i64);
        Ok(StateVector {
            config: vec![next.x as f64],
            velocity: vec![next.v as f64],
        })
    }

    fn reward(&self, s: &StateVector) -> f64 {
        if Self::lattice(s).x == 0 {
            1.0
        } else {
            0.0
        }
    }

    fn observe(&self, s: &StateVector) -> Vec<f64> {
        let angle = std::f64::consts::PI * s.config[0] / self.halfwidth as f64;
        vec![angle.cos(), angle.sin(), s.velocity[0] / MAX_SPEED as f64]
    }

    fn observation_dim(&self) -> usize {
        3
    }
}
