use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::named_params;
use crate::error::{Error, Result};
use crate::mdp::{StateVec, TransitionOutcome};

/// Torque-controlled pendulum. State is `(θ, θ̇)` with `θ = 0` upright.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub max_speed: f64,
    pub max_torque: f64,
    pub dt: f64,
    pub g: f64,
    pub m: f64,
    pub l: f64,
    /// Upright band half-width on the angle.
    pub theta_tol: f64,
    /// Upright band half-width on the angular velocity.
    pub omega_tol: f64,
    /// Initial angle is drawn from `[-start_theta, start_theta]`.
    pub start_theta: f64,
    pub start_omega: f64,
}

named_params!(PendulumParams { max_speed, max_torque, dt, g, m, l, theta_tol, omega_tol, start_theta, start_omega });

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            max_speed: 8.0,
            max_torque: 2.0,
            dt: 0.05,
            g: 10.0,
            m: 1.0,
            l: 1.0,
            theta_tol: 0.2,
            omega_tol: 1.0,
            start_theta: PI,
            start_omega: 1.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.max_speed, self.max_torque, self.dt, self.g, self.m, self.l, self.theta_tol, self.omega_tol];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && self.start_theta >= 0.0 && self.start_omega >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("inconsistent pendulum parameters: {self:?}")))
        }
    }

    pub fn is_upright(&self, s: &StateVec) -> bool {
        angle_norm(s[0]).abs() < self.theta_tol && s[1].abs() < self.omega_tol
    }

    /// Angular acceleration `(3g/2L)·sin θ + 3/(mL²)·u`.
    pub fn acceleration(&self, theta: f64, torque: f64) -> f64 {
        3.0 * self.g / (2.0 * self.l) * theta.sin() + 3.0 / (self.m * self.l * self.l) * torque
    }
}

/// Wraps an angle into `[-π, π)`.
pub fn angle_norm(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

pub fn pendulum_step(state: &StateVec, torque: f64, p: &PendulumParams) -> TransitionOutcome {
    let u = torque.clamp(-p.max_torque, p.max_torque);
    let (theta, omega) = (state[0], state[1]);
    let th = angle_norm(theta);
    let reward = -(th * th + 0.1 * omega * omega + 0.001 * u * u);
    let omega = (omega + p.acceleration(theta, u) * p.dt).clamp(-p.max_speed, p.max_speed);
    let theta = theta + omega * p.dt;
    TransitionOutcome { next_state: StateVec(vec![theta, omega]), reward, terminal: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_rest_is_fixed_point() {
        let p = PendulumParams::default();
        let out = pendulum_step(&StateVec(vec![0.0, 0.0]), 0.0, &p);
        assert_eq!(out.next_state, StateVec(vec![0.0, 0.0]));
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn bottom_is_stable() {
        let p = PendulumParams::default();
        let mut s = StateVec(vec![PI - 0.05, 0.0]);
        for _ in 0..200 {
            s = pendulum_step(&s, 0.0, &p).next_state;
            assert!(angle_norm(s[0]).abs() > PI - 0.1);
        }
    }

    /// `E = ½ θ̇² + (3g/2L)·cos θ` is conserved by the unforced dynamics.
    fn energy(p: &PendulumParams, theta: f64, omega: f64) -> f64 {
        0.5 * omega * omega + 3.0 * p.g / (2.0 * p.l) * theta.cos()
    }

    /// Relative energy error after `steps` unforced steps of size `dt`.
    fn euler_drift(p: &PendulumParams, start: (f64, f64), steps: usize) -> (f64, StateVec) {
        let e0 = energy(p, start.0, start.1);
        let mut s = StateVec(vec![start.0, start.1]);
        for _ in 0..steps {
            s = pendulum_step(&s, 0.0, p).next_state;
        }
        ((energy(p, s[0], s[1]) - e0).abs() / e0.abs(), s)
    }

    #[test]
    fn energy_drift_within_euler_tolerance() {
        let p = PendulumParams::default();
        let start = (2.0, 0.5);
        let horizon = 10.0 * p.dt;

        // Oracle: RK4 at 1/100 of the step size over the same horizon.
        let (mut th, mut om) = start;
        let h = p.dt / 100.0;
        let f = |th: f64, om: f64| (om, p.acceleration(th, 0.0));
        for _ in 0..1000 {
            let k1 = f(th, om);
            let k2 = f(th + 0.5 * h * k1.0, om + 0.5 * h * k1.1);
            let k3 = f(th + 0.5 * h * k2.0, om + 0.5 * h * k2.1);
            let k4 = f(th + h * k3.0, om + h * k3.1);
            th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            om += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        let e0 = energy(&p, start.0, start.1);
        assert!((energy(&p, th, om) - e0).abs() < 1e-8);

        // First-order integrator: error shrinks roughly linearly with dt.
        let mut last = f64::INFINITY;
        for refine in [1usize, 2, 4] {
            let q = PendulumParams { dt: p.dt / refine as f64, ..p };
            let steps = (horizon / q.dt).round() as usize;
            let (drift, s) = euler_drift(&q, start, steps);
            assert!(drift < 0.2 / refine as f64, "dt/{refine}: drift {drift}");
            assert!(drift < 0.7 * last);
            assert!((s[0] - th).abs() < 0.2 / refine as f64);
            last = drift;
        }
    }

    #[test]
    fn torque_and_speed_are_clipped() {
        let p = PendulumParams::default();
        let out = pendulum_step(&StateVec(vec![0.0, 7.99]), 100.0, &p);
        assert_eq!(out.next_state[1], p.max_speed);
        assert!((out.reward + (0.1 * 7.99 * 7.99 + 0.001 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn angle_norm_wraps() {
        assert!((angle_norm(3.0 * PI) + PI).abs() < 1e-12);
        assert!((angle_norm(0.5) - 0.5).abs() < 1e-15);
        assert!((angle_norm(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }
}
