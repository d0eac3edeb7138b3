//! Cart-pole swing-up with viscous joint friction.
//!
//! The pole is a uniform rod hinged on the cart; `theta` is measured from
//! upright. The kinetic energy depends on `theta`, so the system is not
//! separable and is integrated with RK4.

use std::f64::consts::PI;

use crate::dynamics::{rk4_step, HamiltonianSystem, IntegratorConfig, IntegratorMethod};
use crate::error::{Error, Result};
use crate::mdp::{Action, EnvDescriptor, Environment, Involution, StateVector};
use crate::rng::RngStream;

use super::{CONTROL_SUBSTEPS, EPISODE_LENGTH, SUBSTEP_DT};

#[derive(Debug, Clone, PartialEq)]
pub struct CartpoleParams {
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Full length of the pole; its centre of mass sits at half this.
    pub pole_length: f64,
    pub gravity: f64,
    pub track_halfwidth: f64,
    /// Nominal viscous coefficients for the slider and the hinge.
    pub friction_nominal: [f64; 2],
    pub friction_multiplier: f64,
    pub force_limit: f64,
}

impl Default for CartpoleParams {
    fn default() -> Self {
        Self {
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_length: 1.0,
            gravity: 9.81,
            track_halfwidth: 3.0,
            friction_nominal: [5e-4, 2e-6],
            friction_multiplier: 1.0,
            force_limit: 10.0,
        }
    }
}

impl CartpoleParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cart_mass", self.cart_mass),
            ("pole_mass", self.pole_mass),
            ("pole_length", self.pole_length),
            ("gravity", self.gravity),
            ("track_halfwidth", self.track_halfwidth),
            ("force_limit", self.force_limit),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("env.{key}"), format!("must be positive, got {v}")));
            }
        }
        if !(self.friction_multiplier >= 0.0) || !self.friction_multiplier.is_finite() {
            return Err(Error::config("env.friction_multiplier", "must be >= 0"));
        }
        if self.friction_nominal.iter().any(|c| !(*c >= 0.0)) {
            return Err(Error::config("env.friction_nominal", "must be >= 0"));
        }
        Ok(())
    }

    pub fn effective_friction(&self) -> [f64; 2] {
        [
            self.friction_nominal[0] * self.friction_multiplier,
            self.friction_nominal[1] * self.friction_multiplier,
        ]
    }

    fn half_length(&self) -> f64 {
        0.5 * self.pole_length
    }

    /// Pole moment of inertia about the hinge.
    fn hinge_inertia(&self) -> f64 {
        self.pole_mass * self.pole_length * self.pole_length / 3.0
    }
}

/// `(x_dot, theta_dot, x_ddot, theta_ddot)` for state `(x, theta, x_dot, theta_dot)`
/// and applied cart force `force` in newtons.
pub fn cartpole_dynamics(s: &[f64], force: f64, params: &CartpoleParams) -> [f64; 4] {
    let (theta, x_dot, theta_dot) = (s[1], s[2], s[3]);
    let [c_x, c_theta] = params.effective_friction();
    let m = params.pole_mass;
    let lc = params.half_length();
    let (sin, cos) = theta.sin_cos();

    let m11 = params.cart_mass + m;
    let m12 = m * lc * cos;
    let m22 = params.hinge_inertia();
    let rhs1 = force - c_x * x_dot + m * lc * sin * theta_dot * theta_dot;
    let rhs2 = m * params.gravity * lc * sin - c_theta * theta_dot;

    let det = m11 * m22 - m12 * m12;
    let x_ddot = (m22 * rhs1 - m12 * rhs2) / det;
    let theta_ddot = (m11 * rhs2 - m12 * rhs1) / det;
    [x_dot, theta_dot, x_ddot, theta_ddot]
}

#[derive(Debug, Clone)]
pub struct Cartpole {
    params: CartpoleParams,
    integrator: IntegratorConfig,
    descriptor: EnvDescriptor,
}

impl Cartpole {
    pub fn new(params: CartpoleParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            integrator: IntegratorConfig::new(IntegratorMethod::Rk4, SUBSTEP_DT, CONTROL_SUBSTEPS)?,
            descriptor: EnvDescriptor {
                name: "cartpole".into(),
                dof: 2,
                action_dim: 1,
                dt: SUBSTEP_DT * CONTROL_SUBSTEPS as f64,
                episode_length: EPISODE_LENGTH,
                involution: Involution::time_reversal(2),
                solve_threshold: 750.0,
            },
        })
    }

    pub fn params(&self) -> &CartpoleParams {
        &self.params
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator
    }
}

impl HamiltonianSystem for Cartpole {
    fn kinetic_energy(&self, q: &[f64], v: &[f64]) -> f64 {
        let p = &self.params;
        let (x_dot, theta_dot) = (v[0], v[1]);
        0.5 * (p.cart_mass + p.pole_mass) * x_dot * x_dot
            + p.pole_mass * p.half_length() * q[1].cos() * x_dot * theta_dot
            + 0.5 * p.hinge_inertia() * theta_dot * theta_dot
    }

    fn potential_energy(&self, q: &[f64]) -> f64 {
        let p = &self.params;
        p.pole_mass * p.gravity * p.half_length() * q[1].cos()
    }

    fn generalized_force(&self, q: &[f64], v: &[f64], action: &[f64]) -> Vec<f64> {
        let s = [q[0], q[1], v[0], v[1]];
        let d = cartpole_dynamics(&s, action[0] * self.params.force_limit, &self.params);
        vec![d[2], d[3]]
    }
}

impl Environment for Cartpole {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&self, rng: &mut RngStream) -> StateVector {
        let x = rng.uniform(-0.05, 0.05);
        let theta = rng.uniform(PI - 0.1, PI + 0.1);
        let x_dot = rng.uniform(-0.05, 0.05);
        let theta_dot = rng.uniform(-0.05, 0.05);
        StateVector {
            config: vec![x, theta],
            velocity: vec![x_dot, theta_dot],
        }
    }

    fn advance(&self, s: &StateVector, a: &Action) -> Result<StateVector> {
        let force = a.0[0] * self.params.force_limit;
        let mut x = s.to_flat();
        for _ in 0..self.integrator.substeps {
            x = rk4_step(&x, self.integrator.dt, |y| {
                cartpole_dynamics(y, force, &self.params).to_vec()
            })?;
        }
        StateVector::from_flat(&x)
    }

    fn reward(&self, s: &StateVector) -> f64 {
        let x = s.config[0] / self.params.track_halfwidth;
        let centered = (1.0 - x * x).max(0.0);
        0.5 * (1.0 + s.config[1].cos()) * centered
    }

    fn observe(&self, s: &StateVector) -> Vec<f64> {
        let theta = s.config[1];
        vec![
            s.config[0],
            theta.cos(),
            theta.sin(),
            0.5 * s.velocity[0],
            0.1 * s.velocity[1],
        ]
    }

    fn observation_dim(&self) -> usize {
        5
    }
}
