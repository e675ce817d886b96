//! One closed-loop episode: plan, act, repeat until success, termination
//! or the step limit.

use std::time::Instant;

use rpmcts::aggregation::StrategyKind;
use rpmcts::environments::EnvSpec;
use rpmcts::mdp::{derive_seed, discounted_return, rng_from_seed, Environment};
use rpmcts::root_parallel::{plan_step, ParallelPlanSpec};
use serde::Serialize;

use crate::error::{BenchError, Result};

const ENV_STREAM: u64 = 0;
const PLAN_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeRecord {
    pub env: String,
    pub strategy: String,
    pub trial_budget: usize,
    pub seed: u64,
    pub steps: usize,
    pub success: bool,
    pub final_return: f64,
    /// Sum of the aggregation call durations over all steps.
    pub inference_seconds: f64,
    /// Wall time of the whole episode, planning and simulation.
    pub total_seconds: f64,
    pub build_seconds: f64,
    pub trials_executed: u64,
}

impl EpisodeRecord {
    pub fn mean_step_inference(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.inference_seconds / self.steps as f64
        }
    }

    /// Aggregate tree-building throughput over the episode.
    pub fn trials_per_second(&self) -> f64 {
        if self.build_seconds > 0.0 {
            self.trials_executed as f64 / self.build_seconds
        } else {
            0.0
        }
    }
}

/// Runs one episode. All randomness derives from `master_seed`: the
/// environment (start state and transitions) draws from one stream and
/// every planning step from its own child seed, so two strategies run with
/// the same master seed face the same start state.
pub fn run_episode(
    env: &EnvSpec,
    spec: &ParallelPlanSpec,
    trial_budget: usize,
    seed: u64,
    master_seed: u64,
) -> Result<EpisodeRecord> {
    let started = Instant::now();
    let mdp = env.mdp_config();
    let mut env_rng = rng_from_seed(derive_seed(master_seed, ENV_STREAM));
    let plan_root = derive_seed(master_seed, PLAN_STREAM);

    let mut state = env.initial_state(&mut env_rng);
    let mut rewards = Vec::with_capacity(mdp.max_episode_steps);
    let mut inference_seconds = 0.0;
    let mut build_seconds = 0.0;
    let mut trials_executed = 0;
    let mut streak = 0;
    let mut success = false;

    for step in 0..mdp.max_episode_steps {
        let plan = plan_step(&state, spec, env, derive_seed(plan_root, step as u64))?;
        inference_seconds += plan.timing.inference_seconds;
        build_seconds += plan.timing.build_seconds;
        trials_executed += plan.trials_executed;
        if !env.action_box().contains(&plan.action) {
            return Err(BenchError::Runtime(format!("planner returned out-of-box action {:?}", plan.action)));
        }
        let outcome = env.step(&state, &plan.action, &mut env_rng)?;
        rewards.push(outcome.reward);
        state = outcome.next_state;
        streak = if env.in_goal(&state) { streak + 1 } else { 0 };
        if streak >= env.hold_steps() {
            success = true;
            break;
        }
        if outcome.terminal {
            break;
        }
    }

    let total_seconds = started.elapsed().as_secs_f64().max(inference_seconds);
    Ok(EpisodeRecord {
        env: env.name().as_str().to_string(),
        strategy: StrategyKind::name(spec.strategy.kind()).to_string(),
        trial_budget,
        seed,
        steps: rewards.len(),
        success,
        final_return: discounted_return(&rewards, mdp.gamma),
        inference_seconds,
        total_seconds,
        build_seconds,
        trials_executed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Preset, StrategyOverrides};

    fn spec_for(preset: &Preset, kind: StrategyKind, budget: usize, workers: usize) -> ParallelPlanSpec {
        let strategy = preset.strategy(kind, budget, &StrategyOverrides::default()).unwrap();
        ParallelPlanSpec::new(workers, budget, preset.search_params(budget).unwrap(), strategy).unwrap()
    }

    #[test]
    fn teleporter_episode_is_reproducible() {
        let preset = Preset::embedded("random_teleporter").unwrap();
        let env = preset.environment().unwrap();
        let spec = spec_for(&preset, StrategyKind::SimilarityMerge, 15, 2);
        let a = run_episode(&env, &spec, 15, 3, 99).unwrap();
        let b = run_episode(&env, &spec, 15, 3, 99).unwrap();
        assert_eq!((a.steps, a.success, a.final_return), (b.steps, b.success, b.final_return));
        assert!(a.steps <= env.max_episode_steps());
        assert_eq!(a.trials_executed, (a.steps * 2 * 15) as u64);
        assert!(a.inference_seconds <= a.total_seconds);
        // Every step costs -1 and the return is undiscounted.
        assert_eq!(a.final_return, -(a.steps as f64));
    }

    #[test]
    fn pendulum_success_requires_hold() {
        let preset = Preset::embedded("pendulum").unwrap();
        let env = preset.environment().unwrap();
        let spec = spec_for(&preset, StrategyKind::Max, 15, 1);
        let rec = run_episode(&env, &spec, 15, 0, 5).unwrap();
        if rec.success {
            assert!(rec.steps >= env.hold_steps());
        } else {
            assert_eq!(rec.steps, env.max_episode_steps());
        }
    }
}
