//! Integrators, energy accounting and the round-trip reversibility defect.
//!
//! Leapfrog (velocity Verlet) is symplectic and exactly time-reversible for
//! separable systems: integrating forward, negating the velocity, integrating
//! again and negating once more lands back on the start state up to rounding.
//! RK4 and the Euler schemes are not, and their energy error grows with the
//! horizon.

use crate::error::{Error, Result};
use crate::mdp::{conjugate_state, Action, Environment, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorMethod {
    Leapfrog,
    Rk4,
    SemiImplicitEuler,
    ExplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: IntegratorMethod,
    /// Substep length in seconds.
    pub dt: f64,
    /// Substeps per control interval.
    pub substeps: usize,
}

impl IntegratorConfig {
    pub fn new(method: IntegratorMethod, dt: f64, substeps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::contract(format!("integrator dt must be > 0, got {dt}")));
        }
        if substeps == 0 {
            return Err(Error::contract("integrator needs at least one substep"));
        }
        Ok(Self {
            method,
            dt,
            substeps,
        })
    }

    /// Length of one control interval.
    pub fn control_dt(&self) -> f64 {
        self.dt * self.substeps as f64
    }
}

/// A mechanical system split into kinetic and potential energy plus the
/// generalized forces that drive it.
pub trait HamiltonianSystem {
    fn kinetic_energy(&self, q: &[f64], v: &[f64]) -> f64;
    fn potential_energy(&self, q: &[f64]) -> f64;
    /// Gravity, actuation and friction, expressed as accelerations when the
    /// system uses the unit-mass convention.
    fn generalized_force(&self, q: &[f64], v: &[f64], action: &[f64]) -> Vec<f64>;
}

pub fn total_energy(sys: &dyn HamiltonianSystem, q: &[f64], v: &[f64]) -> f64 {
    sys.kinetic_energy(q, v) + sys.potential_energy(q)
}

/// Unit-mass oscillator with `V = k q^2 / 2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicOscillator {
    pub stiffness: f64,
}

impl Default for HarmonicOscillator {
    fn default() -> Self {
        Self { stiffness: 1.0 }
    }
}

impl HamiltonianSystem for HarmonicOscillator {
    fn kinetic_energy(&self, _q: &[f64], v: &[f64]) -> f64 {
        0.5 * v.iter().map(|x| x * x).sum::<f64>()
    }

    fn potential_energy(&self, q: &[f64]) -> f64 {
        0.5 * self.stiffness * q.iter().map(|x| x * x).sum::<f64>()
    }

    fn generalized_force(&self, q: &[f64], _v: &[f64], action: &[f64]) -> Vec<f64> {
        q.iter()
            .enumerate()
            .map(|(i, x)| -self.stiffness * x + action.get(i).copied().unwrap_or(0.0))
            .collect()
    }
}

fn check_finite(values: &[f64], state: impl FnOnce() -> Vec<f64>) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::SimulationDiverged { state: state() })
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + a * xi).collect()
}

/// Kick-drift-kick leapfrog under the unit-mass convention:
/// `p+ = p + dt/2 F(q)`, `q' = q + dt p+`, `p' = p+ + dt/2 F(q')`.
pub fn leapfrog_step<F>(q: &[f64], p: &[f64], dt: f64, mut force: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let whole = || [q, p].concat();
    let f0 = force(q);
    check_finite(&f0, whole)?;
    let p_half = axpy(0.5 * dt, &f0, p);
    let q_next = axpy(dt, &p_half, q);
    let f1 = force(&q_next);
    check_finite(&f1, || [q_next.as_slice(), p_half.as_slice()].concat())?;
    let p_next = axpy(0.5 * dt, &f1, &p_half);
    Ok((q_next, p_next))
}

/// Symplectic Euler: kick with the old position, then drift.
pub fn semi_implicit_euler_step<F>(
    q: &[f64],
    p: &[f64],
    dt: f64,
    mut force: F,
) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let f0 = force(q);
    check_finite(&f0, || [q, p].concat())?;
    let p_next = axpy(dt, &f0, p);
    let q_next = axpy(dt, &p_next, q);
    Ok((q_next, p_next))
}

/// Classical four-stage Runge-Kutta.
pub fn rk4_step<F>(x: &[f64], dt: f64, mut deriv: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let k1 = deriv(x);
    check_finite(&k1, || x.to_vec())?;
    let k2 = deriv(&axpy(0.5 * dt, &k1, x));
    check_finite(&k2, || x.to_vec())?;
    let k3 = deriv(&axpy(0.5 * dt, &k2, x));
    check_finite(&k3, || x.to_vec())?;
    let k4 = deriv(&axpy(dt, &k3, x));
    check_finite(&k4, || x.to_vec())?;
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| xi + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

pub fn explicit_euler_step<F>(x: &[f64], dt: f64, mut deriv: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let k = deriv(x);
    check_finite(&k, || x.to_vec())?;
    Ok(axpy(dt, &k, x))
}

/// Roll forward through `actions`, conjugate, roll forward through the
/// actions in reverse order, conjugate again, and report the max-abs distance
/// to `s0`. Zero for an exactly reversible environment/integrator pair.
pub fn round_trip_defect(env: &dyn Environment, s0: &StateVector, actions: &[Action]) -> Result<f64> {
    if actions.is_empty() {
        return Err(Error::contract("round trip needs at least one action"));
    }
    let inv = &env.descriptor().involution;
    let mut s = s0.clone();
    for a in actions {
        s = env.step(&s, a)?.next;
    }
    s = conjugate_state(&s, inv)?;
    for a in actions.iter().rev() {
        s = env.step(&s, a)?.next;
    }
    s = conjugate_state(&s, inv)?;
    Ok(s.max_abs_diff(s0))
}
