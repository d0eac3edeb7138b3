//! Fully actuated planar n-link arm of uniform rods in a vertical plane.
//!
//! Joint angles are relative; absolute link angles `phi_j = q_0 + .. + q_j`
//! are measured from the downward vertical, so `q = 0` hangs straight down.
//! Equations of motion `M(q) q'' + C(q, q') q' + g(q) = tau` are assembled in
//! absolute coordinates and pulled back through the constant map `phi = T q`.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{rk4_step, HamiltonianSystem, IntegratorConfig, IntegratorMethod};
use crate::error::{Error, Result};
use crate::mdp::{Action, EnvDescriptor, Environment, Involution, StateVector};
use crate::rng::RngStream;

use super::{CONTROL_SUBSTEPS, EPISODE_LENGTH, SUBSTEP_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TorqueTier {
    /// uM
    Under,
    /// iM
    Intermediate,
    /// oM
    Over,
}

impl TorqueTier {
    /// Multiple of the torque that holds the straight arm horizontal.
    pub fn factor(self) -> f64 {
        match self {
            TorqueTier::Under => 0.4,
            TorqueTier::Intermediate => 1.0,
            TorqueTier::Over => 2.0,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "um" => Some(TorqueTier::Under),
            "im" => Some(TorqueTier::Intermediate),
            "om" => Some(TorqueTier::Over),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            TorqueTier::Under => "um",
            TorqueTier::Intermediate => "im",
            TorqueTier::Over => "om",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorParams {
    pub n_links: usize,
    pub link_mass: f64,
    pub link_length: f64,
    pub gravity: f64,
    pub torque_tier: TorqueTier,
}

impl ManipulatorParams {
    pub fn new(n_links: usize, torque_tier: TorqueTier) -> Self {
        Self {
            n_links,
            link_mass: 0.5,
            link_length: 0.5,
            gravity: 9.81,
            torque_tier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n_links) {
            return Err(Error::config("env.n_links", format!("must be 2, 3 or 4, got {}", self.n_links)));
        }
        for (key, v) in [
            ("link_mass", self.link_mass),
            ("link_length", self.link_length),
            ("gravity", self.gravity),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("env.{key}"), format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.n_links as f64 * self.link_length
    }

    /// Static torque each joint needs to hold the straight arm horizontal.
    pub fn holding_torques(&self) -> Vec<f64> {
        let n = self.n_links;
        (0..n)
            .map(|k| {
                (k..n)
                    .map(|i| {
                        let arm = (i - k) as f64 * self.link_length + 0.5 * self.link_length;
                        self.link_mass * self.gravity * arm
                    })
                    .sum()
            })
            .collect()
    }

    pub fn torque_limits(&self) -> Vec<f64> {
        let f = self.torque_tier.factor();
        self.holding_torques().into_iter().map(|t| f * t).collect()
    }

    /// `a_ij`: lever from joint j to the centre of link i (zero for j > i).
    fn lever(&self, i: usize, j: usize) -> f64 {
        if j < i {
            self.link_length
        } else if j == i {
            0.5 * self.link_length
        } else {
            0.0
        }
    }

    /// Angle-independent coefficients of the absolute-coordinate mass matrix.
    fn mass_coefficients(&self) -> DMatrix<f64> {
        let n = self.n_links;
        let rod_inertia = self.link_mass * self.link_length * self.link_length / 12.0;
        DMatrix::from_fn(n, n, |j, k| {
            let mut c: f64 = (j.max(k)..n)
                .map(|i| self.link_mass * self.lever(i, j) * self.lever(i, k))
                .sum();
            if j == k {
                c += rod_inertia;
            }
            c
        })
    }

    /// `sum_{i >= j} m_i a_ij`, the gravity moment arm of joint j.
    fn gravity_moments(&self) -> Vec<f64> {
        let n = self.n_links;
        (0..n)
            .map(|j| (j..n).map(|i| self.link_mass * self.lever(i, j)).sum())
            .collect()
    }
}

fn cumulative(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Mass matrix in joint coordinates.
pub fn mass_matrix(q: &[f64], params: &ManipulatorParams) -> DMatrix<f64> {
    let phi = cumulative(q);
    let c = params.mass_coefficients();
    let n = params.n_links;
    let abs = DMatrix::from_fn(n, n, |j, k| c[(j, k)] * (phi[j] - phi[k]).cos());
    let t = DMatrix::from_fn(n, n, |r, col| if col <= r { 1.0 } else { 0.0 });
    t.transpose() * abs * t
}

/// Joint accelerations `q'' = M(q)^-1 (tau - C(q, q') q' - g(q))`.
pub fn manipulator_dynamics(q: &[f64], qdot: &[f64], tau: &[f64], params: &ManipulatorParams) -> Result<Vec<f64>> {
    let n = params.n_links;
    if q.len() != n || qdot.len() != n || tau.len() != n {
        return Err(Error::contract(format!("manipulator expects {n} joints")));
    }
    let phi = cumulative(q);
    let phi_dot = cumulative(qdot);
    let c = params.mass_coefficients();
    let g_moments = params.gravity_moments();

    let m_abs = DMatrix::from_fn(n, n, |j, k| c[(j, k)] * (phi[j] - phi[k]).cos());
    let bias_abs = DVector::from_fn(n, |j, _| {
        let coriolis: f64 = (0..n)
            .map(|k| c[(j, k)] * (phi[j] - phi[k]).sin() * phi_dot[k] * phi_dot[k])
            .sum();
        coriolis + params.gravity * phi[j].sin() * g_moments[j]
    });

    let t = DMatrix::from_fn(n, n, |r, col| if col <= r { 1.0 } else { 0.0 });
    let m = t.transpose() * &m_abs * &t;
    let rhs = DVector::from_column_slice(tau) - t.transpose() * bias_abs;
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::contract("manipulator mass matrix is not positive definite"))?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

#[derive(Debug, Clone)]
pub struct Manipulator {
    params: ManipulatorParams,
    limits: Vec<f64>,
    integrator: IntegratorConfig,
    descriptor: EnvDescriptor,
}

impl Manipulator {
    pub fn new(params: ManipulatorParams) -> Result<Self> {
        params.validate()?;
        let n = params.n_links;
        Ok(Self {
            limits: params.torque_limits(),
            integrator: IntegratorConfig::new(IntegratorMethod::Rk4, SUBSTEP_DT, CONTROL_SUBSTEPS)?,
            descriptor: EnvDescriptor {
                name: format!("manipulator-{n}-{}", params.torque_tier.tag()),
                dof: n,
                action_dim: n,
                dt: SUBSTEP_DT * CONTROL_SUBSTEPS as f64,
                episode_length: EPISODE_LENGTH,
                involution: Involution::time_reversal(n),
                solve_threshold: 800.0,
            },
            params,
        })
    }

    pub fn params(&self) -> &ManipulatorParams {
        &self.params
    }

    pub fn torque_limits(&self) -> &[f64] {
        &self.limits
    }

    pub fn integrator(&self) -> IntegratorConfig {
        self.integrator
    }

    /// Joint torques for a normalized (already clamped) action.
    pub fn torques(&self, a: &Action) -> Vec<f64> {
        a.0.iter().zip(&self.limits).map(|(u, l)| u * l).collect()
    }

    /// Height of the arm tip above the base.
    pub fn tip_height(&self, q: &[f64]) -> f64 {
        -cumulative(q)
            .iter()
            .map(|phi| self.params.link_length * phi.cos())
            .sum::<f64>()
    }
}

impl HamiltonianSystem for Manipulator {
    fn kinetic_energy(&self, q: &[f64], v: &[f64]) -> f64 {
        let m = mass_matrix(q, &self.params);
        let v = DVector::from_column_slice(v);
        0.5 * (v.transpose() * m * &v)[(0, 0)]
    }

    fn potential_energy(&self, q: &[f64]) -> f64 {
        let g = self.params.gravity_moments();
        -self.params.gravity
            * cumulative(q)
                .iter()
                .zip(&g)
                .map(|(phi, gm)| phi.cos() * gm)
                .sum::<f64>()
    }

    fn generalized_force(&self, q: &[f64], v: &[f64], action: &[f64]) -> Vec<f64> {
        let tau = self.torques(&Action(action.to_vec()).clamped());
        manipulator_dynamics(q, v, &tau, &self.params).unwrap_or_else(|_| vec![f64::NAN; q.len()])
    }
}

impl Environment for Manipulator {
    fn descriptor(&self) -> &EnvDescriptor {
        &self.descriptor
    }

    fn reset(&self, rng: &mut RngStream) -> StateVector {
        let n = self.params.n_links;
        StateVector {
            config: (0..n).map(|_| rng.uniform(-0.05, 0.05)).collect(),
            velocity: vec![0.0; n],
        }
    }

    fn advance(&self, s: &StateVector, a: &Action) -> Result<StateVector> {
        let tau = self.torques(a);
        let n = self.params.n_links;
        let mut x = s.to_flat();
        for _ in 0..self.integrator.substeps {
            let mut failure = None;
            x = rk4_step(&x, self.integrator.dt, |y| {
                let (q, qd) = y.split_at(n);
                match manipulator_dynamics(q, qd, &tau, &self.params) {
                    Ok(acc) => [qd, acc.as_slice()].concat(),
                    Err(e) => {
                        failure = Some(e);
                        vec![f64::NAN; 2 * n]
                    }
                }
            })
            .map_err(|e| failure.take().unwrap_or(e))?;
        }
        StateVector::from_flat(&x)
    }

    fn reward(&self, s: &StateVector) -> f64 {
        let h = self.tip_height(&s.config) / self.params.total_length();
        (0.5 * (h + 1.0)).clamp(0.0, 1.0)
    }

    fn observe(&self, s: &StateVector) -> Vec<f64> {
        let mut obs = Vec::with_capacity(3 * s.dof());
        obs.extend(s.config.iter().map(|q| q.cos()));
        obs.extend(s.config.iter().map(|q| q.sin()));
        obs.extend(s.velocity.iter().map(|v| 0.1 * v));
        obs
    }

    fn observation_dim(&self) -> usize {
        3 * self.params.n_links
    }
}
