//! Root parallelization: `K` independent trees grown from the same root
//! state, one OS thread each, followed by a single aggregation call.

use std::thread;
use std::time::Instant;

use crate::aggregation::{aggregate, AggregationChoice, ForestStats, GpDiagnostics};
use crate::error::{Error, Result};
use crate::mcts::{SearchParams, SearchTree};
use crate::mdp::{derive_seed, rng_from_seed, Environment, StateVec};

/// Stream index reserved for the aggregation step (candidate generation).
const AGGREGATION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelPlanSpec {
    pub workers: usize,
    pub trials_per_worker: usize,
    pub search: SearchParams,
    pub strategy: AggregationChoice,
}

impl ParallelPlanSpec {
    /// The single-thread baseline always runs exactly one worker, whatever
    /// `workers` says.
    pub fn new(workers: usize, trials_per_worker: usize, search: SearchParams, strategy: AggregationChoice) -> Result<Self> {
        let workers = if matches!(strategy, AggregationChoice::SingleThread) { 1 } else { workers };
        if workers == 0 || trials_per_worker == 0 {
            return Err(Error::InvalidParameter("workers and trials per worker must be positive".into()));
        }
        search.validate()?;
        strategy.validate()?;
        Ok(Self { workers, trials_per_worker, search: search.with_trials(trials_per_worker), strategy })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanTiming {
    /// Tree construction, from first spawn to join.
    pub build_seconds: f64,
    /// The aggregation call alone.
    pub inference_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub action: Vec<f64>,
    pub timing: PlanTiming,
    pub forest: ForestStats,
    pub trials_executed: u64,
    pub gp: Option<GpDiagnostics>,
}

fn grow_tree<E: Environment + ?Sized>(root: &StateVec, search: &SearchParams, env: &E, seed: u64) -> (SearchTree, f64) {
    let start = Instant::now();
    let mut rng = rng_from_seed(seed);
    let mut tree = SearchTree::new(root.clone());
    tree.search(search, env, &mut rng);
    (tree, start.elapsed().as_secs_f64())
}

/// Grows every worker's tree and returns them in worker order.
pub fn build_trees<E: Environment + ?Sized>(
    root: &StateVec,
    spec: &ParallelPlanSpec,
    env: &E,
    master_seed: u64,
) -> (Vec<SearchTree>, Vec<f64>) {
    let seeds: Vec<u64> = (0..spec.workers as u64).map(|w| derive_seed(master_seed, w)).collect();
    let results: Vec<(SearchTree, f64)> = if spec.workers == 1 {
        vec![grow_tree(root, &spec.search, env, seeds[0])]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| scope.spawn(move || grow_tree(root, &spec.search, env, seed)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("search worker panicked")).collect()
        })
    };
    results.into_iter().unzip()
}

/// Builds the forest and collects every tree's root statistics.
pub fn build_forest<E: Environment + ?Sized>(
    root: &StateVec,
    spec: &ParallelPlanSpec,
    env: &E,
    master_seed: u64,
) -> Result<(ForestStats, u64)> {
    let (trees, wall_times) = build_trees(root, spec, env, master_seed);
    let trials = trees.iter().map(SearchTree::trials).sum();
    let per_tree = trees
        .iter()
        .enumerate()
        .map(|(i, t)| t.root_action_stats(i))
        .collect::<Result<Vec<_>>>()?;
    Ok((ForestStats { per_tree, wall_times }, trials))
}

/// Plans one action from `root`.
pub fn plan_step<E: Environment + ?Sized>(
    root: &StateVec,
    spec: &ParallelPlanSpec,
    env: &E,
    master_seed: u64,
) -> Result<PlanOutcome> {
    let build_start = Instant::now();
    let (forest, trials_executed) = build_forest(root, spec, env, master_seed)?;
    let build_seconds = build_start.elapsed().as_secs_f64();

    let inference_start = Instant::now();
    let aggregated = aggregate(&spec.strategy, &forest, env.action_box(), derive_seed(master_seed, AGGREGATION_STREAM))?;
    let inference_seconds = inference_start.elapsed().as_secs_f64();

    debug_assert!(env.action_box().contains(&aggregated.action));
    Ok(PlanOutcome {
        action: aggregated.action,
        timing: PlanTiming { build_seconds, inference_seconds },
        forest,
        trials_executed,
        gp: aggregated.gp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{select_max, select_most_visited, ActionStats};
    use crate::environments::{EnvName, EnvSpec};

    fn setup(strategy: AggregationChoice, workers: usize) -> (EnvSpec, ParallelPlanSpec) {
        let env = EnvSpec::preset(EnvName::RandomTeleporter);
        let search = SearchParams::new(10.0, 2.0, 0.7, Some(crate::mcts::DpwParams { d: 1.2, beta: 0.2 }), 15).unwrap();
        (env, ParallelPlanSpec::new(workers, 15, search, strategy).unwrap())
    }

    #[test]
    fn single_worker_max_matches_plain_search() {
        let (env, spec) = setup(AggregationChoice::Max, 1);
        let root = env.start_state();
        let out = plan_step(&root, &spec, &env, 77).unwrap();
        let mut rng = rng_from_seed(derive_seed(77, 0));
        let mut tree = SearchTree::new(root);
        tree.search(&spec.search, &env, &mut rng);
        assert_eq!(out.action, tree.best_root_action().unwrap());
    }

    #[test]
    fn deterministic_across_runs() {
        let (env, spec) = setup(AggregationChoice::Max, 8);
        let root = env.start_state();
        let a = plan_step(&root, &spec, &env, 5).unwrap();
        let b = plan_step(&root, &spec, &env, 5).unwrap();
        assert_eq!(a.action, b.action);
        assert_eq!(a.forest.per_tree, b.forest.per_tree);
    }

    #[test]
    fn budget_and_timing() {
        let (env, spec) = setup(AggregationChoice::MostVisited, 8);
        let out = plan_step(&env.start_state(), &spec, &env, 5).unwrap();
        assert_eq!(out.trials_executed, 8 * 15);
        assert_eq!(out.forest.per_tree.len(), 8);
        assert!(out.forest.per_tree.iter().all(|t| !t.is_empty()));
        assert!(out.timing.build_seconds >= 0.0 && out.timing.inference_seconds >= 0.0);
        let visits: u64 = out.forest.entries().map(|e| e.visits).sum();
        assert_eq!(visits, 8 * 15);
    }

    #[test]
    fn strategies_pick_from_union() {
        let (env, spec) = setup(AggregationChoice::Max, 8);
        let out = plan_step(&env.start_state(), &spec, &env, 9).unwrap();
        let all: Vec<&ActionStats> = out.forest.entries().collect();
        for a in [select_max(&out.forest).unwrap(), select_most_visited(&out.forest).unwrap()] {
            assert!(all.iter().any(|e| e.action == a));
        }
    }

    #[test]
    fn single_thread_forces_one_worker() {
        let (_, spec) = setup(AggregationChoice::SingleThread, 8);
        assert_eq!(spec.workers, 1);
    }

    #[test]
    fn adding_workers_keeps_existing_streams() {
        let (env, spec4) = setup(AggregationChoice::Max, 4);
        let (_, spec8) = setup(AggregationChoice::Max, 8);
        let root = env.start_state();
        let (f4, _) = build_forest(&root, &spec4, &env, 3).unwrap();
        let (f8, _) = build_forest(&root, &spec8, &env, 3).unwrap();
        assert_eq!(f4.per_tree[..], f8.per_tree[..4]);
    }
}
