//! Markov decision process abstractions shared by the planner, the
//! environments and the aggregation strategies.
//!
//! Environments are immutable descriptions; the evolving state is carried in
//! [`StateVec`] values and every stochastic transition draws from an explicit
//! random stream, so a planner can hand each worker its own stream without
//! any shared mutable state.

use rand::Rng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Random stream type used throughout the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a random stream from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// Mixes a parent seed with a stream index (splitmix64 finalizer over both
/// words). Used to derive per-worker, per-step and per-episode streams so that
/// adding workers never perturbs the streams of existing ones.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(parent.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Axis-aligned continuous action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBox {
    low: Vec<f64>,
    high: Vec<f64>,
}

impl ActionBox {
    pub fn new(low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if low.is_empty() {
            return Err(Error::InvalidParameter("action box must have at least one dimension".into()));
        }
        if low.len() != high.len() {
            return Err(Error::DimensionMismatch { expected: low.len(), got: high.len() });
        }
        if low.iter().zip(&high).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(Error::InvalidParameter(format!(
                "action box bounds must be finite with low < high, got {low:?} / {high:?}"
            )));
        }
        Ok(Self { low, high })
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn contains(&self, action: &[f64]) -> bool {
        action.len() == self.dim()
            && action
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(a, (l, h))| a.is_finite() && *a >= *l && *a <= *h)
    }

    pub fn check(&self, action: &[f64]) -> Result<()> {
        if action.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: action.len() });
        }
        if !self.contains(action) {
            return Err(Error::ActionOutOfBounds { action: action.to_vec() });
        }
        Ok(())
    }

    pub fn clamp(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(a, (l, h))| a.clamp(*l, *h))
            .collect()
    }

    /// Uniform sample from the box.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(l, h)| rng.gen_range(*l..=*h))
            .collect()
    }

    /// Maps a point of the unit cube onto the box.
    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        unit.iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(u, (l, h))| l + u.clamp(0.0, 1.0) * (h - l))
            .collect()
    }
}

/// Environment state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec(pub Vec<f64>);

impl StateVec {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("state has non-finite entries: {values:?}")));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for StateVec {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A sampled successor together with its reward.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionOutcome {
    pub next_state: StateVec,
    pub reward: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MdpConfig {
    pub gamma: f64,
    pub max_episode_steps: usize,
    pub rollout_depth: usize,
}

impl MdpConfig {
    pub fn new(gamma: f64, max_episode_steps: usize, rollout_depth: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
        }
        if max_episode_steps == 0 {
            return Err(Error::InvalidParameter("max_episode_steps must be positive".into()));
        }
        Ok(Self { gamma, max_episode_steps, rollout_depth })
    }
}

/// Generative model of an MDP.
///
/// Implementations must be pure functions of `(state, action, rng state)`:
/// calling [`Environment::step`] twice with equal inputs and identically
/// seeded streams yields identical outcomes.
pub trait Environment: Send + Sync {
    fn action_box(&self) -> &ActionBox;

    fn mdp_config(&self) -> MdpConfig;

    /// Samples a successor. Callers must pass an in-box action and must never
    /// step a terminal state.
    fn sample_transition(&self, state: &StateVec, action: &[f64], rng: &mut SimRng) -> TransitionOutcome;

    fn initial_state(&self, rng: &mut SimRng) -> StateVec;

    /// Whether `state` satisfies the per-step success condition. Episodes end
    /// in success once this holds for [`Environment::hold_steps`] consecutive
    /// steps.
    fn in_goal(&self, state: &StateVec) -> bool;

    fn hold_steps(&self) -> usize {
        1
    }

    /// Value estimate added at the end of a truncated rollout.
    fn leaf_value(&self, _state: &StateVec) -> f64 {
        0.0
    }

    /// Checked transition: rejects out-of-box actions.
    fn step(&self, state: &StateVec, action: &[f64], rng: &mut SimRng) -> Result<TransitionOutcome> {
        self.action_box().check(action)?;
        Ok(self.sample_transition(state, action, rng))
    }
}

/// `Σ_t γ^t · r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}
