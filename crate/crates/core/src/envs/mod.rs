//! Concrete environments and the name-based registry.
//!
//! | name                        | dynamics                  | integrator |
//! |-----------------------------|---------------------------|------------|
//! | `pendulum`                  | torque-limited pendulum   | leapfrog   |
//! | `cartpole`                  | cart-pole with friction   | RK4        |
//! | `manipulator-{2,3,4}-{um,im,om}` | planar n-link arm    | RK4        |
//! | `velocity-chain`            | ring lattice particle     | exact      |
//!
//! The continuous tasks share a 0.02 s control interval split into ten
//! 0.002 s substeps and run 1000 control steps per episode.

pub mod cartpole;
pub mod manipulator;
pub mod pendulum;
pub mod tabular;
pub mod velocity_chain;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::mdp::Environment;

pub use cartpole::{cartpole_dynamics, Cartpole, CartpoleParams};
pub use manipulator::{manipulator_dynamics, Manipulator, ManipulatorParams, TorqueTier};
pub use pendulum::{Pendulum, PendulumParams};
pub use tabular::{Kernel, TabularMDP};
pub use velocity_chain::{build_velocity_chain, VelocityChain};

pub const SUBSTEP_DT: f64 = 0.002;
pub const CONTROL_SUBSTEPS: usize = 10;
pub const EPISODE_LENGTH: usize = 1000;

/// Parameter overrides from the `env.*` section of a run config. Each key
/// only applies to some environments; setting one the selected environment
/// does not have is an error.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvOverrides {
    pub mass: Option<f64>,
    pub length: Option<f64>,
    pub gravity: Option<f64>,
    pub damping: Option<f64>,
    pub torque_limit: Option<f64>,
    pub cart_mass: Option<f64>,
    pub pole_mass: Option<f64>,
    pub pole_length: Option<f64>,
    pub track_halfwidth: Option<f64>,
    pub friction_multiplier: Option<f64>,
    pub force_limit: Option<f64>,
    pub link_mass: Option<f64>,
    pub link_length: Option<f64>,
    pub halfwidth: Option<usize>,
}

impl EnvOverrides {
    fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! probe {
            ($($f:ident),*) => { $( if self.$f.is_some() { keys.push(stringify!($f)); } )* };
        }
        probe!(
            mass,
            length,
            gravity,
            damping,
            torque_limit,
            cart_mass,
            pole_mass,
            pole_length,
            track_halfwidth,
            friction_multiplier,
            force_limit,
            link_mass,
            link_length,
            halfwidth
        );
        keys
    }

    fn only(&self, env: &str, allowed: &[&str]) -> Result<()> {
        match self.set_keys().into_iter().find(|k| !allowed.contains(k)) {
            Some(k) => Err(Error::config(format!("env.{k}"), format!("not a parameter of `{env}`"))),
            None => Ok(()),
        }
    }
}

/// Builds an environment from its registry name.
pub fn make_env(name: &str, overrides: &EnvOverrides) -> Result<Box<dyn Environment>> {
    let o = overrides;
    match name {
        "pendulum" => {
            o.only(name, &["mass", "length", "gravity", "damping", "torque_limit"])?;
            let d = PendulumParams::default();
            Ok(Box::new(Pendulum::new(PendulumParams {
                mass: o.mass.unwrap_or(d.mass),
                length: o.length.unwrap_or(d.length),
                gravity: o.gravity.unwrap_or(d.gravity),
                damping: o.damping.unwrap_or(d.damping),
                torque_limit: o.torque_limit.unwrap_or(d.torque_limit),
            })?))
        }
        "cartpole" => {
            o.only(
                name,
                &[
                    "cart_mass",
                    "pole_mass",
                    "pole_length",
                    "gravity",
                    "track_halfwidth",
                    "friction_multiplier",
                    "force_limit",
                ],
            )?;
            let d = CartpoleParams::default();
            Ok(Box::new(Cartpole::new(CartpoleParams {
                cart_mass: o.cart_mass.unwrap_or(d.cart_mass),
                pole_mass: o.pole_mass.unwrap_or(d.pole_mass),
                pole_length: o.pole_length.unwrap_or(d.pole_length),
                gravity: o.gravity.unwrap_or(d.gravity),
                track_halfwidth: o.track_halfwidth.unwrap_or(d.track_halfwidth),
                friction_multiplier: o.friction_multiplier.unwrap_or(d.friction_multiplier),
                force_limit: o.force_limit.unwrap_or(d.force_limit),
                ..d
            })?))
        }
        "velocity-chain" => {
            o.only(name, &["halfwidth"])?;
            Ok(Box::new(VelocityChain::new(o.halfwidth.unwrap_or(4))?))
        }
        _ => {
            let (n, tier) = parse_manipulator_name(name).ok_or_else(|| Error::UnknownEnv(name.to_string()))?;
            o.only(name, &["link_mass", "link_length", "gravity"])?;
            let d = ManipulatorParams::new(n, tier);
            Ok(Box::new(Manipulator::new(ManipulatorParams {
                link_mass: o.link_mass.unwrap_or(d.link_mass),
                link_length: o.link_length.unwrap_or(d.link_length),
                gravity: o.gravity.unwrap_or(d.gravity),
                ..d
            })?))
        }
    }
}

fn parse_manipulator_name(name: &str) -> Option<(usize, TorqueTier)> {
    let rest = name.strip_prefix("manipulator-")?;
    let (n, tier) = rest.split_once('-')?;
    let n: usize = n.parse().ok()?;
    if !(2..=4).contains(&n) {
        return None;
    }
    Some((n, TorqueTier::parse(tier)?))
}

/// Every registered environment name.
pub fn env_names() -> Vec<String> {
    let mut names = vec!["pendulum".to_string(), "cartpole".to_string()];
    for n in 2..=4 {
        for tier in ["um", "im", "om"] {
            names.push(format!("manipulator-{n}-{tier}"));
        }
    }
    names.push("velocity-chain".to_string());
    names
}
