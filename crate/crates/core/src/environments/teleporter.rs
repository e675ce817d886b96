use rand::Rng;
use serde::{Deserialize, Serialize};

use super::named_params;
use crate::error::{Error, Result};
use crate::mdp::{SimRng, StateVec, TransitionOutcome};

/// Random Teleporter and its corridor variants: a point agent in a square
/// arena whose intended displacement is perturbed in magnitude and
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TeleporterParams {
    /// The arena is `[0, arena_size]²`.
    pub arena_size: f64,
    pub start_x: f64,
    pub start_y: f64,
    pub goal_x: f64,
    pub goal_y: f64,
    pub goal_radius: f64,
    /// Half-width of the action box: the largest intended displacement
    /// along each axis.
    pub max_step: f64,
    /// Relative magnitude noise, `ε_m ~ U(−σ_m, σ_m)`.
    pub magnitude_noise: f64,
    /// Direction noise in degrees, `ε_d ~ U(−σ_d, σ_d)`.
    pub direction_noise_deg: f64,
    pub corridor_half_width: f64,
    /// Push towards the goal inside the corridor.
    pub inside_force: f64,
    /// Push away from the goal outside the corridor.
    pub outside_force: f64,
}

named_params!(TeleporterParams {
    arena_size,
    start_x,
    start_y,
    goal_x,
    goal_y,
    goal_radius,
    max_step,
    magnitude_noise,
    direction_noise_deg,
    corridor_half_width,
    inside_force,
    outside_force,
});

impl Default for TeleporterParams {
    fn default() -> Self {
        Self {
            arena_size: 10.0,
            start_x: 1.0,
            start_y: 2.0,
            goal_x: 9.0,
            goal_y: 8.0,
            goal_radius: 0.5,
            max_step: 1.0,
            magnitude_noise: 0.2,
            direction_noise_deg: 15.0,
            corridor_half_width: 1.5,
            inside_force: 0.5,
            outside_force: 0.25,
        }
    }
}

impl TeleporterParams {
    pub fn validate(&self) -> Result<()> {
        let inside = |x: f64, y: f64| (0.0..=self.arena_size).contains(&x) && (0.0..=self.arena_size).contains(&y);
        let ok = self.arena_size > 0.0
            && inside(self.start_x, self.start_y)
            && inside(self.goal_x, self.goal_y)
            && self.goal_radius > 0.0
            && self.max_step > 0.0
            && (0.0..1.0).contains(&self.magnitude_noise)
            && (0.0..180.0).contains(&self.direction_noise_deg)
            && self.corridor_half_width > 0.0
            && self.inside_force >= 0.0
            && self.outside_force >= 0.0
            && self.goal_distance(&StateVec(vec![self.start_x, self.start_y])) > self.goal_radius;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent teleporter parameters: {self:?}")))
        }
    }

    pub fn goal_distance(&self, s: &StateVec) -> f64 {
        (s[0] - self.goal_x).hypot(s[1] - self.goal_y)
    }

    pub fn is_goal(&self, s: &StateVec) -> bool {
        self.goal_distance(s) <= self.goal_radius
    }

    /// Negated distance to the goal disc in units of `max_step`.
    pub fn distance_value(&self, s: &StateVec) -> f64 {
        -((self.goal_distance(s) - self.goal_radius).max(0.0) / self.max_step)
    }

    fn clamp_to_arena(&self, x: f64, y: f64) -> StateVec {
        StateVec(vec![x.clamp(0.0, self.arena_size), y.clamp(0.0, self.arena_size)])
    }
}

/// Position-dependent push along a straight corridor from start to goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceField {
    /// Unit vector from start to goal.
    pub corridor_axis: [f64; 2],
    /// A point on the corridor centreline.
    pub corridor_center: StateVec,
    pub corridor_half_width: f64,
    pub inside_force: [f64; 2],
    pub outside_force: [f64; 2],
}

impl ForceField {
    pub fn straight(p: &TeleporterParams) -> Self {
        let (dx, dy) = (p.goal_x - p.start_x, p.goal_y - p.start_y);
        let len = dx.hypot(dy);
        let axis = [dx / len, dy / len];
        Self {
            corridor_axis: axis,
            corridor_center: StateVec(vec![p.start_x, p.start_y]),
            corridor_half_width: p.corridor_half_width,
            inside_force: [p.inside_force * axis[0], p.inside_force * axis[1]],
            outside_force: [-p.outside_force * axis[0], -p.outside_force * axis[1]],
        }
    }

    /// Perpendicular distance to the corridor centreline.
    pub fn distance_to_centerline(&self, s: &StateVec) -> f64 {
        let (rx, ry) = (s[0] - self.corridor_center[0], s[1] - self.corridor_center[1]);
        (rx * self.corridor_axis[1] - ry * self.corridor_axis[0]).abs()
    }

    pub fn force_at(&self, s: &StateVec) -> [f64; 2] {
        if self.distance_to_centerline(s) <= self.corridor_half_width {
            self.inside_force
        } else {
            self.outside_force
        }
    }
}

/// Intended displacement after magnitude and direction noise.
fn noisy_displacement(action: &[f64], rng: &mut SimRng, p: &TeleporterParams) -> [f64; 2] {
    let (ax, ay) = (action[0], action[1]);
    // Always draw both variates so streams stay aligned whatever the noise levels.
    let u_m: f64 = rng.gen();
    let u_d: f64 = rng.gen();
    let eps_m = p.magnitude_noise * (2.0 * u_m - 1.0);
    let eps_d = p.direction_noise_deg.to_radians() * (2.0 * u_d - 1.0);
    if eps_m == 0.0 && eps_d == 0.0 {
        return [ax, ay];
    }
    let (sin, cos) = eps_d.sin_cos();
    let scale = 1.0 + eps_m;
    [scale * (cos * ax - sin * ay), scale * (sin * ax + cos * ay)]
}

fn finish(next: StateVec, p: &TeleporterParams) -> TransitionOutcome {
    let terminal = p.is_goal(&next);
    TransitionOutcome { next_state: next, reward: -1.0, terminal }
}

pub fn teleporter_step(state: &StateVec, action: &[f64], rng: &mut SimRng, p: &TeleporterParams) -> TransitionOutcome {
    let d = noisy_displacement(action, rng, p);
    finish(p.clamp_to_arena(state[0] + d[0], state[1] + d[1]), p)
}

pub fn corridor_step(
    state: &StateVec,
    action: &[f64],
    rng: &mut SimRng,
    p: &TeleporterParams,
    field: &ForceField,
) -> TransitionOutcome {
    let d = noisy_displacement(action, rng, p);
    let f = field.force_at(state);
    finish(p.clamp_to_arena(state[0] + d[0] + f[0], state[1] + d[1] + f[1]), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::rng_from_seed;

    fn quiet() -> TeleporterParams {
        TeleporterParams { magnitude_noise: 0.0, direction_noise_deg: 0.0, ..Default::default() }
    }

    #[test]
    fn zero_noise_moves_exactly() {
        let p = quiet();
        let mut rng = rng_from_seed(0);
        let out = teleporter_step(&StateVec(vec![3.0, 4.0]), &[0.6, -0.5], &mut rng, &p);
        assert_eq!(out.next_state, StateVec(vec![3.6, 3.5]));
        assert_eq!(out.reward, -1.0);
        assert!(!out.terminal);
    }

    #[test]
    fn straight_line_step_count() {
        let p = quiet();
        let mut rng = rng_from_seed(0);
        let mut s = StateVec(vec![p.start_x, p.start_y]);
        let dir = [p.goal_x - p.start_x, p.goal_y - p.start_y];
        let len = dir[0].hypot(dir[1]);
        let a = [dir[0] / len * p.max_step, dir[1] / len * p.max_step];
        let mut steps = 0;
        loop {
            let out = teleporter_step(&s, &a, &mut rng, &p);
            steps += 1;
            s = out.next_state;
            if out.terminal {
                break;
            }
        }
        // Geometry oracle: touching the goal disc needs ceil((d - r) / max_step) steps.
        let expected = ((len - p.goal_radius) / p.max_step).ceil() as usize;
        assert_eq!(steps, expected);
    }

    #[test]
    fn same_seed_same_perturbation() {
        let p = TeleporterParams::default();
        let s = StateVec(vec![5.0, 5.0]);
        let a = teleporter_step(&s, &[0.3, 0.9], &mut rng_from_seed(4), &p);
        let b = teleporter_step(&s, &[0.3, 0.9], &mut rng_from_seed(4), &p);
        assert_eq!(a, b);
    }

    #[test]
    fn noise_stays_within_bounds() {
        let p = TeleporterParams::default();
        let mut rng = rng_from_seed(8);
        let s = StateVec(vec![5.0, 5.0]);
        for _ in 0..500 {
            let out = teleporter_step(&s, &[1.0, 0.0], &mut rng, &p);
            let (dx, dy) = (out.next_state[0] - 5.0, out.next_state[1] - 5.0);
            let mag = dx.hypot(dy);
            assert!(mag >= 0.8 - 1e-12 && mag <= 1.2 + 1e-12);
            assert!(dy.atan2(dx).abs() <= 15f64.to_radians() + 1e-12);
        }
    }

    #[test]
    fn positions_stay_in_arena() {
        let p = TeleporterParams::default();
        let mut rng = rng_from_seed(1);
        let out = teleporter_step(&StateVec(vec![0.2, 9.9]), &[-1.0, 1.0], &mut rng, &p);
        assert!(out.next_state.0.iter().all(|v| (0.0..=10.0).contains(v)));
    }

    #[test]
    fn corridor_regions() {
        let p = TeleporterParams { corridor_half_width: 0.5, ..quiet() };
        let field = ForceField::straight(&p);
        let mut rng = rng_from_seed(0);
        let on_line = StateVec(vec![p.start_x, p.start_y]);
        let out = corridor_step(&on_line, &[0.2, 0.1], &mut rng, &p, &field);
        let expect = [on_line[0] + 0.2 + field.inside_force[0], on_line[1] + 0.1 + field.inside_force[1]];
        assert!((out.next_state[0] - expect[0]).abs() < 1e-12 && (out.next_state[1] - expect[1]).abs() < 1e-12);

        let far = StateVec(vec![8.0, 1.0]);
        assert!(field.distance_to_centerline(&far) > p.corridor_half_width);
        let f = field.force_at(&far);
        let to_goal = [p.goal_x - far[0], p.goal_y - far[1]];
        assert!(f[0] * to_goal[0] + f[1] * to_goal[1] < 0.0);
    }

    #[test]
    fn zero_action_drifts_along_corridor() {
        let p = TeleporterParams { corridor_half_width: 0.5, ..quiet() };
        let field = ForceField::straight(&p);
        let mut rng = rng_from_seed(0);
        let mut s = StateVec(vec![p.start_x, p.start_y]);
        let d0 = p.goal_distance(&s);
        for k in 1..=5 {
            s = corridor_step(&s, &[0.0, 0.0], &mut rng, &p, &field).next_state;
            let closed_form = d0 - k as f64 * p.inside_force;
            assert!((p.goal_distance(&s) - closed_form).abs() < 1e-9);
        }
    }

    #[test]
    fn rewards_never_positive() {
        let p = TeleporterParams::default();
        let field = ForceField::straight(&p);
        let mut rng = rng_from_seed(2);
        let mut s = StateVec(vec![p.start_x, p.start_y]);
        for _ in 0..100 {
            let a = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let out = corridor_step(&s, &a, &mut rng, &p, &field);
            assert!(out.reward <= 0.0);
            if out.terminal {
                break;
            }
            s = out.next_state;
        }
    }
}
