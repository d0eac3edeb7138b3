//! Torque-limited pendulum swing-up.
//!
//! Point mass on a massless rod, angle `theta` measured from upright so the
//! hanging rest state is `theta = pi`. Integrated with leapfrog, which makes
//! the frictionless pendulum exactly reversible up to rounding.

use std::f64::consts::PI;

use crate::dynamics::{leapfrog_step, HamiltonianSystem, IntegratorConfig, IntegratorMethod};
use crate::error::{Error, Result};
use crate::mdp::{Action, EnvDescriptor, Environment, Involution, StateVector};
use crate::rng::RngStream;

use super::{CONTROL_SUBSTEPS, EPISODE_LENGTH, SUBSTEP_DT};

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    /// Viscous joint damping, N m s / rad.
    pub damping: f64,
    pub torque_limit: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            damping: 0.0,
            torque_limit: 4.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("length", self.length),
            ("gravity", self.gravity),
            ("torque_limit", self.torque_limit),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("env.{key}"), format!("must be positive, got {v}")));
            }
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(Error::config("env.damping", "must be >= 0"));
        }
        Ok(())
    }

    fn inertia(&self) -> f64 {
        self.mass * self.length * self.length
    }
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    integrator: IntegratorConfig,
    descriptor: EnvDescriptor,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            integrator: IntegratorConfig::new(IntegratorMethod::Leapfrog, SUBSTEP_DT, CONTROL_SUBSTEPS)?,
            descriptor: EnvDescriptor {
                name: "pendulum".into(),
                dof: 1,
                action_dim: 1,
                dt: SUBSTEP_DT * CONTROL_SUBSTEPS as f64,
                episode_length: EPISODE_LENGTH,
                involution: Involution::time_reversal(1),
                solve_threshold: 600.0,
            },
        })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator
    }

    /// Angular acceleration from gravity and a constant torque (no damping).
    fn conservative_accel(&self, theta: f64, torque: f64) -> f64 {
        let p = &self.params;
        p.gravity / p.length * theta.sin() + torque / p.inertia()
    }
}

impl HamiltonianSystem for Pendulum {
    fn kinetic_energy(&self, _q: &[f64], v: &[f64]) -> f64 {
        0.5 * self.params.inertia() * v[0] * v[0]
    }

    fn potential_energy(&self, q: &[f64]) -> f64 {
        let p = &self.params;
        p.mass * p.gravity * p.length * q[0].cos()
    }

    fn generalized_force(&self, q: &[f64], v: &[f64], action: &[f64]) -> Vec<f64> {
        let torque = action[0] * self.params.torque_limit;
        vec![self.conservative_accel(q[0], torque) - self.params.damping / self.params.inertia() * v[0]]
    }
}

impl Environment for Pendulum {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&self, rng: &mut RngStream) -> StateVector {
        let theta = rng.uniform(PI - 0.1, PI + 0.1);
        let omega = rng.uniform(-0.05, 0.05);
        StateVector {
            config: vec![theta],
            velocity: vec![omega],
        }
    }

    fn advance(&self, s: &StateVector, a: &Action) -> Result<StateVector> {
        let torque = a.0[0] * self.params.torque_limit;
        let h = self.integrator.dt;
        // Damping enters as an exact exponential decay split around each
        // leapfrog step; with zero damping this is plain leapfrog.
        let decay = (-self.params.damping / self.params.inertia() * 0.5 * h).exp();
        let mut q = s.config.clone();
        let mut p = s.velocity.clone();
        for _ in 0..self.integrator.substeps {
            p[0] *= decay;
            let (q1, p1) = leapfrog_step(&q, &p, h, |q| vec![self.conservative_accel(q[0], torque)])?;
            q = q1;
            p = p1;
            p[0] *= decay;
        }
        Ok(StateVector {
            config: q,
            velocity: p,
        })
    }

    fn reward(&self, s: &StateVector) -> f64 {
        0.5 * (1.0 + s.config[0].cos())
    }

    fn observe(&self, s: &StateVector) -> Vec<f64> {
        let theta = s.config[0];
        vec![theta.cos(), theta.sin(), 0.1 * s.velocity[0]]
    }

    fn observation_dim(&self) -> usize {
        3
    }
}
