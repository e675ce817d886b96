use serde::{Deserialize, Serialize};

use super::named_params;
use crate::error::{Error, Result};
use crate::mdp::{StateVec, TransitionOutcome};

/// Continuous mountain car. State is `(position, velocity)`, the action a
/// force in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MountainCarParams {
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal_position: f64,
    pub goal_velocity: f64,
    pub power: f64,
    pub gravity: f64,
    pub ctrl_cost: f64,
    pub goal_bonus: f64,
    pub start_low: f64,
    pub start_high: f64,
    /// Scale of the energy-based leaf value.
    pub energy_value_scale: f64,
}

named_params!(MountainCarParams {
    min_position,
    max_position,
    max_speed,
    goal_position,
    goal_velocity,
    power,
    gravity,
    ctrl_cost,
    goal_bonus,
    start_low,
    start_high,
    energy_value_scale,
});

impl Default for MountainCarParams {
    fn default() -> Self {
        Self {
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            goal_position: 0.45,
            goal_velocity: 0.0,
            power: 0.0015,
            gravity: 0.0025,
            ctrl_cost: 0.1,
            goal_bonus: 100.0,
            start_low: -0.6,
            start_high: -0.4,
            energy_value_scale: 100.0,
        }
    }
}

impl MountainCarParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_position < self.goal_position
            && self.goal_position <= self.max_position
            && self.max_speed > 0.0
            && self.power > 0.0
            && self.gravity > 0.0
            && self.start_low <= self.start_high
            && self.start_low >= self.min_position
            && self.start_high < self.goal_position;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent mountain car parameters: {self:?}")))
        }
    }

    pub fn is_goal(&self, s: &StateVec) -> bool {
        s[0] >= self.goal_position && s[1] >= self.goal_velocity
    }

    /// Mechanical energy `v²/2 + (g/3)·sin(3x)`.
    pub fn energy(&self, s: &StateVec) -> f64 {
        0.5 * s[1] * s[1] + self.gravity / 3.0 * (3.0 * s[0]).sin()
    }

    /// Fraction of the energy gap between the valley at rest and the goal
    /// height, scaled by `energy_value_scale`.
    pub fn energy_value(&self, s: &StateVec) -> f64 {
        let floor = -self.gravity / 3.0;
        let goal = self.gravity / 3.0 * (3.0 * self.goal_position).sin();
        let frac = ((self.energy(s) - floor) / (goal - floor)).clamp(0.0, 1.0);
        self.energy_value_scale * frac
    }
}

pub fn mountain_car_step(state: &StateVec, force: f64, p: &MountainCarParams) -> TransitionOutcome {
    let force = force.clamp(-1.0, 1.0);
    let (mut x, mut v) = (state[0], state[1]);
    v += force * p.power - p.gravity * (3.0 * x).cos();
    v = v.clamp(-p.max_speed, p.max_speed);
    x = (x + v).clamp(p.min_position, p.max_position);
    if x <= p.min_position && v < 0.0 {
        v = 0.0;
    }
    let next = StateVec(vec![x, v]);
    let terminal = p.is_goal(&next);
    let mut reward = -p.ctrl_cost * force * force;
    if terminal {
        reward += p.goal_bonus;
    }
    TransitionOutcome { next_state: next, reward, terminal }
}
