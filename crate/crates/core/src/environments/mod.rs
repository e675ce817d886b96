//! Evaluation environments with closed-form dynamics.
//!
//! [`EnvSpec`] bundles an environment's dynamics parameters with its MDP
//! settings and implements [`Environment`]. Dynamics parameters can be
//! inspected and overridden by name, which is how config files reach them.

mod mountain_car;
mod pendulum;
mod teleporter;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use mountain_car::{mountain_car_step, MountainCarParams};
pub use pendulum::{angle_norm, pendulum_step, PendulumParams};
pub use teleporter::{corridor_step, teleporter_step, ForceField, TeleporterParams};

use crate::error::{Error, Result};
use crate::mdp::{ActionBox, Environment, MdpConfig, SimRng, StateVec, TransitionOutcome};

/// Dynamics parameters addressable by field name.
pub(crate) trait NamedParams {
    fn names(&self) -> &'static [&'static str];
    fn get(&self, key: &str) -> Option<f64>;
    fn set(&mut self, key: &str, value: f64) -> bool;
}

macro_rules! named_params {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::environments::NamedParams for $ty {
            fn names(&self) -> &'static [&'static str] {
                &[$(stringify!($field)),*]
            }
            fn get(&self, key: &str) -> Option<f64> {
                match key {
                    $(stringify!($field) => Some(self.$field),)*
                    _ => None,
                }
            }
            fn set(&mut self, key: &str, value: f64) -> bool {
                match key {
                    $(stringify!($field) => { self.$field = value; true })*
                    _ => false,
                }
            }
        }
    };
}
pub(crate) use named_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvName {
    MountainCar,
    Pendulum,
    RandomTeleporter,
    WideCorridor,
    NarrowCorridor,
}

impl EnvName {
    pub const ALL: [EnvName; 5] = [
        EnvName::MountainCar,
        EnvName::Pendulum,
        EnvName::RandomTeleporter,
        EnvName::WideCorridor,
        EnvName::NarrowCorridor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::MountainCar => "mountain_car",
            EnvName::Pendulum => "pendulum",
            EnvName::RandomTeleporter => "random_teleporter",
            EnvName::WideCorridor => "wide_corridor",
            EnvName::NarrowCorridor => "narrow_corridor",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, EnvName::RandomTeleporter | EnvName::WideCorridor | EnvName::NarrowCorridor)
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "lunar_lander" {
            return Err(Error::InvalidParameter(
                "lunar_lander needs an external rigid-body simulator; only its planner preset is shipped".into(),
            ));
        }
        EnvName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown environment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dynamics {
    MountainCar(MountainCarParams),
    Pendulum(PendulumParams),
    /// Random Teleporter, or a corridor variant when a force field is present.
    Teleporter { params: TeleporterParams, field: Option<ForceField> },
}

/// A fully parameterized environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    name: EnvName,
    action_box: ActionBox,
    mdp: MdpConfig,
    hold_steps: usize,
    dynamics: Dynamics,
}

impl EnvSpec {
    /// Reference parameters for `name`.
    pub fn preset(name: EnvName) -> Self {
        let (mdp, hold_steps, dynamics) = match name {
            EnvName::MountainCar => (
                MdpConfig { gamma: 0.99, max_episode_steps: 300, rollout_depth: 10 },
                1,
                Dynamics::MountainCar(MountainCarParams::default()),
            ),
            EnvName::Pendulum => (
                MdpConfig { gamma: 0.99, max_episode_steps: 200, rollout_depth: 10 },
                10,
                Dynamics::Pendulum(PendulumParams::default()),
            ),
            EnvName::RandomTeleporter => (
                MdpConfig { gamma: 1.0, max_episode_steps: 50, rollout_depth: 3 },
                1,
                Dynamics::Teleporter { params: TeleporterParams::default(), field: None },
            ),
            EnvName::WideCorridor | EnvName::NarrowCorridor => {
                let mut params = TeleporterParams::default();
                params.corridor_half_width = if name == EnvName::WideCorridor { 1.5 } else { 0.5 };
                (
                    MdpConfig { gamma: 1.0, max_episode_steps: 50, rollout_depth: 3 },
                    1,
                    Dynamics::Teleporter { params, field: None },
                )
            }
        };
        Self::assemble(name, mdp, hold_steps, dynamics).expect("reference presets are valid")
    }

    fn assemble(name: EnvName, mdp: MdpConfig, hold_steps: usize, dynamics: Dynamics) -> Result<Self> {
        MdpConfig::new(mdp.gamma, mdp.max_episode_steps, mdp.rollout_depth)?;
        if hold_steps == 0 {
            return Err(Error::InvalidParameter("hold_steps must be positive".into()));
        }
        let (action_box, dynamics) = match dynamics {
            Dynamics::MountainCar(p) => {
                p.validate()?;
                (ActionBox::symmetric(1, 1.0)?, Dynamics::MountainCar(p))
            }
            Dynamics::Pendulum(p) => {
                p.validate()?;
                (ActionBox::symmetric(1, p.max_torque)?, Dynamics::Pendulum(p))
            }
            Dynamics::Teleporter { params, .. } => {
                params.validate()?;
                let field = match name {
                    EnvName::WideCorridor | EnvName::NarrowCorridor => Some(ForceField::straight(&params)),
                    _ => None,
                };
                (ActionBox::symmetric(2, params.max_step)?, Dynamics::Teleporter { params, field })
            }
        };
        Ok(Self { name, action_box, mdp, hold_steps, dynamics })
    }

    pub fn name(&self) -> EnvName {
        self.name
    }

    pub fn stochastic(&self) -> bool {
        self.name.is_stochastic()
    }

    pub fn state_dim(&self) -> usize {
        2
    }

    pub fn max_episode_steps(&self) -> usize {
        self.mdp.max_episode_steps
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    fn named(&self) -> &dyn NamedParams {
        match &self.dynamics {
            Dynamics::MountainCar(p) => p,
            Dynamics::Pendulum(p) => p,
            Dynamics::Teleporter { params, .. } => params,
        }
    }

    /// Dynamics parameters by name.
    pub fn env_params(&self) -> BTreeMap<String, f64> {
        let p = self.named();
        p.names().iter().map(|k| (k.to_string(), p.get(k).expect("listed name"))).collect()
    }

    /// Returns a copy with the given MDP settings and parameter overrides.
    /// Unknown parameter names are rejected.
    pub fn with_overrides(&self, mdp: MdpConfig, hold_steps: usize, overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut dynamics = self.dynamics.clone();
        {
            let target: &mut dyn NamedParams = match &mut dynamics {
                Dynamics::MountainCar(p) => p,
                Dynamics::Pendulum(p) => p,
                Dynamics::Teleporter { params, .. } => params,
            };
            for (key, value) in overrides {
                if !target.set(key, *value) {
                    return Err(Error::InvalidParameter(format!("unknown parameter '{key}' for {}", self.name)));
                }
            }
        }
        Self::assemble(self.name, mdp, hold_steps, dynamics)
    }

    /// Nominal start state (the centre of the randomized start region for
    /// the deterministic environments).
    pub fn start_state(&self) -> StateVec {
        match &self.dynamics {
            Dynamics::MountainCar(p) => StateVec(vec![0.5 * (p.start_low + p.start_high), 0.0]),
            Dynamics::Pendulum(_) => StateVec(vec![std::f64::consts::PI, 0.0]),
            Dynamics::Teleporter { params, .. } => StateVec(vec![params.start_x, params.start_y]),
        }
    }
}

impl Environment for EnvSpec {
    fn action_box(&self) -> &ActionBox {
        &self.action_box
    }

    fn mdp_config(&self) -> MdpConfig {
        self.mdp
    }

    fn sample_transition(&self, state: &StateVec, action: &[f64], rng: &mut SimRng) -> TransitionOutcome {
        match &self.dynamics {
            Dynamics::MountainCar(p) => mountain_car_step(state, action[0], p),
            Dynamics::Pendulum(p) => pendulum_step(state, action[0], p),
            Dynamics::Teleporter { params, field: None } => teleporter_step(state, action, rng, params),
            Dynamics::Teleporter { params, field: Some(f) } => corridor_step(state, action, rng, params, f),
        }
    }

    fn initial_state(&self, rng: &mut SimRng) -> StateVec {
        use rand::Rng;
        match &self.dynamics {
            Dynamics::MountainCar(p) => StateVec(vec![rng.gen_range(p.start_low..=p.start_high), 0.0]),
            Dynamics::Pendulum(p) => StateVec(vec![
                rng.gen_range(-p.start_theta..=p.start_theta),
                rng.gen_range(-p.start_omega..=p.start_omega),
            ]),
            Dynamics::Teleporter { .. } => self.start_state(),
        }
    }

    fn in_goal(&self, state: &StateVec) -> bool {
        match &self.dynamics {
            Dynamics::MountainCar(p) => p.is_goal(state),
            Dynamics::Pendulum(p) => p.is_upright(state),
            Dynamics::Teleporter { params, .. } => params.is_goal(state),
        }
    }

    fn hold_steps(&self) -> usize {
        self.hold_steps
    }

    fn leaf_value(&self, state: &StateVec) -> f64 {
        match &self.dynamics {
            Dynamics::MountainCar(p) => p.energy_value(state),
            Dynamics::Pendulum(_) => 0.0,
            Dynamics::Teleporter { params, .. } => params.distance_value(state),
        }
    }
}
