//! Experiment grids and the time-equalized comparison.
//!
//! Results are CSV, one row per episode, columns in this order:
//! `env,strategy,trial_budget,seed,steps,success,final_return,inference_seconds,total_seconds`.
//! The time-equalized comparison appends a `delta_trials` column.

use std::collections::HashSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use rpmcts::aggregation::StrategyKind;
use rpmcts::environments::EnvSpec;
use rpmcts::mdp::derive_seed;
use rpmcts::root_parallel::{plan_step, ParallelPlanSpec};
use serde::{Deserialize, Serialize};

use crate::config::{Preset, StrategyOverrides};
use crate::episode::{run_episode, EpisodeRecord};
use crate::error::{BenchError, Result};

pub const CSV_COLUMNS: [&str; 9] = [
    "env",
    "strategy",
    "trial_budget",
    "seed",
    "steps",
    "success",
    "final_return",
    "inference_seconds",
    "total_seconds",
];

/// Planning steps timed during throughput calibration.
const CALIBRATION_STEPS: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub envs: Vec<String>,
    pub strategies: Vec<StrategyKind>,
    /// `None` runs each preset's own budget schedule.
    pub trial_budgets: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    /// `None` uses each preset's worker count.
    pub workers: Option<usize>,
    pub master_seed: u64,
    pub overrides: StrategyOverrides,
    /// Preset directory or file; the shipped presets when absent.
    pub config: Option<PathBuf>,
    /// Report each finished episode on standard error.
    pub progress: bool,
}

impl ExperimentGrid {
    pub fn new(envs: Vec<String>, strategies: Vec<StrategyKind>, seeds: Vec<u64>) -> Self {
        Self {
            envs,
            strategies,
            trial_budgets: None,
            seeds,
            workers: None,
            master_seed: 0,
            overrides: StrategyOverrides::default(),
            config: None,
            progress: true,
        }
    }

    /// Checks every cell's configuration without running anything.
    pub fn resolve(&self) -> Result<Vec<EnvPlan>> {
        let fail = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.envs.is_empty() || self.strategies.is_empty() || self.seeds.is_empty() {
            return fail("grid needs at least one environment, strategy and seed");
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return fail("seeds must be distinct");
        }
        if let Some(b) = &self.trial_budgets {
            if b.is_empty() || b.contains(&0) {
                return fail("trial budgets must be a non-empty list of positive integers");
            }
        }
        if self.workers == Some(0) {
            return fail("workers must be positive");
        }
        let mut plans = Vec::with_capacity(self.envs.len());
        for name in &self.envs {
            let preset = Preset::resolve(name, self.config.as_deref())?;
            let env = preset.environment()?;
            let budgets = self.trial_budgets.clone().unwrap_or_else(|| preset.trial_budgets.clone());
            let workers = self.workers.unwrap_or(preset.workers);
            let mut specs = Vec::new();
            for &budget in &budgets {
                for &kind in &self.strategies {
                    let strategy = preset.strategy(kind, budget, &self.overrides)?;
                    let spec = ParallelPlanSpec::new(workers, budget, preset.search_params(budget)?, strategy)
                        .map_err(|e| BenchError::Config(e.to_string()))?;
                    specs.push((budget, spec));
                }
            }
            plans.push(EnvPlan { preset, env, specs });
        }
        Ok(plans)
    }

    pub fn episode_count(&self, plans: &[EnvPlan]) -> usize {
        plans.iter().map(|p| p.specs.len()).sum::<usize>() * self.seeds.len()
    }
}

/// A validated environment together with its (budget, planner) cells.
#[derive(Debug, Clone)]
pub struct EnvPlan {
    pub preset: Preset,
    pub env: EnvSpec,
    pub specs: Vec<(usize, ParallelPlanSpec)>,
}

/// Master seed of one episode. It ignores the strategy so that every
/// strategy in a cell sees the same start state and transition noise.
pub fn episode_seed(master: u64, env: &str, budget: usize, seed: u64) -> u64 {
    let env_key = env.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    derive_seed(derive_seed(derive_seed(master, env_key), budget as u64), seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub env: String,
    pub strategy: String,
    pub trial_budget: usize,
    pub seed: u64,
    pub steps: usize,
    pub success: bool,
    pub final_return: f64,
    pub inference_seconds: f64,
    pub total_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_trials: Option<usize>,
}

impl CsvRow {
    fn from_record(r: &EpisodeRecord, delta_trials: Option<usize>) -> Self {
        Self {
            env: r.env.clone(),
            strategy: r.strategy.clone(),
            trial_budget: r.trial_budget,
            seed: r.seed,
            steps: r.steps,
            success: r.success,
            final_return: r.final_return,
            inference_seconds: r.inference_seconds,
            total_seconds: r.total_seconds,
            delta_trials,
        }
    }
}

struct RowWriter {
    inner: csv::Writer<File>,
}

impl RowWriter {
    fn create(path: &Path, with_delta: bool) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
        if with_delta {
            header.push("delta_trials");
        }
        inner.write_record(&header)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    fn push(&mut self, row: &CsvRow) -> Result<()> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<CsvRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().take(CSV_COLUMNS.len()).ne(CSV_COLUMNS.iter().copied()) {
        return Err(BenchError::Runtime(format!("{}: unexpected header {:?}", path.display(), headers)));
    }
    reader.deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

fn progress(done: usize, total: usize, r: &EpisodeRecord, extra: &str) {
    eprintln!(
        "[{done}/{total}] {} {} budget={} seed={} steps={} success={} inference={:.4}s total={:.3}s{extra}",
        r.env, r.strategy, r.trial_budget, r.seed, r.steps, r.success, r.inference_seconds, r.total_seconds
    );
}

/// Runs every (environment, budget, strategy, seed) episode and writes one
/// row per episode to `out`, flushing after each.
pub fn run_grid(grid: &ExperimentGrid, out: &Path) -> Result<Vec<EpisodeRecord>> {
    let plans = grid.resolve()?;
    let total = grid.episode_count(&plans);
    let mut writer = RowWriter::create(out, false)?;
    let mut records = Vec::with_capacity(total);
    for plan in &plans {
        let name = plan.env.name().as_str();
        for (budget, spec) in &plan.specs {
            for &seed in &grid.seeds {
                let master = episode_seed(grid.master_seed, name, *budget, seed);
                let record = run_episode(&plan.env, spec, *budget, seed, master)?;
                writer.push(&CsvRow::from_record(&record, None))?;
                records.push(record);
                if grid.progress {
                    progress(records.len(), total, records.last().unwrap(), "");
                }
            }
        }
    }
    Ok(records)
}

/// Aggregate trials per second of tree construction, measured by planning
/// a few steps from the start state.
pub fn calibrate_trials_per_second(env: &EnvSpec, spec: &ParallelPlanSpec, master_seed: u64) -> Result<f64> {
    let root = env.start_state();
    let (mut trials, mut seconds) = (0_u64, 0.0);
    // The first call warms caches and is discarded.
    for i in 0..=CALIBRATION_STEPS {
        let out = plan_step(&root, spec, env, derive_seed(master_seed, i))?;
        if i > 0 {
            trials += out.trials_executed;
            seconds += out.timing.build_seconds;
        }
    }
    if trials == 0 || seconds <= 0.0 || !seconds.is_finite() {
        return Err(BenchError::Runtime("throughput calibration measured no elapsed time".into()));
    }
    Ok(trials as f64 / seconds)
}

/// Extra trials per worker that fit in `inference_seconds` at the given
/// aggregate throughput.
pub fn compensation_trials(inference_seconds: f64, trials_per_second: f64, workers: usize) -> usize {
    let delta = (inference_seconds * trials_per_second / workers as f64).round();
    if delta.is_finite() && delta > 0.0 {
        delta as usize
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeEqualizedCell {
    pub trial_budget: usize,
    pub trials_per_second: f64,
    /// Mean GPR2P aggregation time per planning step.
    pub step_inference_seconds: f64,
    pub delta_trials: usize,
    pub gpr2p: Vec<EpisodeRecord>,
    pub merge: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeEqualizedSetup {
    pub env: String,
    pub trial_budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    pub workers: Option<usize>,
    pub master_seed: u64,
    pub overrides: StrategyOverrides,
    pub config: Option<PathBuf>,
    pub progress: bool,
}

/// GPR2P at budget `b` against Similarity Merge at `b + Δ`, where `Δ`
/// converts GPR2P's per-step aggregation time into extra trials per worker.
pub fn time_equalized_compare(setup: &TimeEqualizedSetup, out: &Path) -> Result<Vec<TimeEqualizedCell>> {
    let grid = ExperimentGrid {
        envs: vec![setup.env.clone()],
        strategies: vec![StrategyKind::Gpr2p, StrategyKind::SimilarityMerge],
        trial_budgets: Some(setup.trial_budgets.clone()),
        seeds: setup.seeds.clone(),
        workers: setup.workers,
        master_seed: setup.master_seed,
        overrides: setup.overrides.clone(),
        config: setup.config.clone(),
        progress: setup.progress,
    };
    let plan = grid.resolve()?.remove(0);
    let workers = grid.workers.unwrap_or(plan.preset.workers);
    let name = plan.env.name().as_str();
    let total = setup.trial_budgets.len() * setup.seeds.len() * 2;
    let mut writer = RowWriter::create(out, true)?;
    let mut cells = Vec::new();
    let mut done = 0;

    for &budget in &setup.trial_budgets {
        let gpr_spec = plan.specs.iter().find(|(b, s)| *b == budget && s.strategy.kind() == StrategyKind::Gpr2p).unwrap().1;
        let merge_choice = plan.preset.strategy(StrategyKind::SimilarityMerge, budget, &setup.overrides)?;

        let tps = calibrate_trials_per_second(&plan.env, &gpr_spec, derive_seed(setup.master_seed, budget as u64))?;
        let mut gpr2p = Vec::new();
        for &seed in &setup.seeds {
            let r = run_episode(&plan.env, &gpr_spec, budget, seed, episode_seed(setup.master_seed, name, budget, seed))?;
            done += 1;
            if setup.progress {
                progress(done, total, &r, "");
            }
            gpr2p.push(r);
        }
        let steps: usize = gpr2p.iter().map(|r| r.steps).sum();
        let step_inference = gpr2p.iter().map(|r| r.inference_seconds).sum::<f64>() / steps.max(1) as f64;
        let delta = compensation_trials(step_inference, tps, workers);
        log::info!("budget {budget}: {tps:.0} trials/s, {step_inference:.6}s GPR2P inference per step, delta = {delta}");

        let merge_spec = ParallelPlanSpec::new(workers, budget + delta, plan.preset.search_params(budget + delta)?, merge_choice)?;
        let mut merge = Vec::new();
        for &seed in &setup.seeds {
            let r = run_episode(&plan.env, &merge_spec, budget, seed, episode_seed(setup.master_seed, name, budget, seed))?;
            done += 1;
            if setup.progress {
                progress(done, total, &r, &format!(" delta={delta}"));
            }
            merge.push(r);
        }
        for r in gpr2p.iter().chain(&merge) {
            writer.push(&CsvRow::from_record(r, Some(delta)))?;
        }
        cells.push(TimeEqualizedCell {
            trial_budget: budget,
            trials_per_second: tps,
            step_inference_seconds: step_inference,
            delta_trials: delta,
            gpr2p,
            merge,
        });
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_is_nonnegative_and_rounds() {
        assert_eq!(compensation_trials(0.0, 1e6, 8), 0);
        assert_eq!(compensation_trials(1e-9, 1e3, 8), 0);
        assert_eq!(compensation_trials(0.01, 8000.0, 8), 10);
        assert_eq!(compensation_trials(0.0106, 8000.0, 8), 11);
        assert_eq!(compensation_trials(f64::NAN, 1.0, 1), 0);
    }

    #[test]
    fn episode_seed_ignores_nothing_but_strategy() {
        let base = episode_seed(1, "pendulum", 15, 0);
        assert_ne!(base, episode_seed(2, "pendulum", 15, 0));
        assert_ne!(base, episode_seed(1, "mountain_car", 15, 0));
        assert_ne!(base, episode_seed(1, "pendulum", 30, 0));
        assert_ne!(base, episode_seed(1, "pendulum", 15, 1));
        assert_eq!(base, episode_seed(1, "pendulum", 15, 0));
    }

    #[test]
    fn resolve_rejects_bad_grids() {
        let ok = ExperimentGrid::new(vec!["pendulum".into()], vec![StrategyKind::Max], vec![0, 1]);
        assert!(ok.resolve().is_ok());
        let mut dup = ok.clone();
        dup.seeds = vec![3, 3];
        assert!(matches!(dup.resolve(), Err(BenchError::Config(_))));
        let mut unknown = ok.clone();
        unknown.envs.push("lunar_lander".into());
        assert!(matches!(unknown.resolve(), Err(BenchError::Config(_))));
        let mut empty = ok.clone();
        empty.strategies.clear();
        assert!(matches!(empty.resolve(), Err(BenchError::Config(_))));
        let mut zero = ok;
        zero.trial_budgets = Some(vec![15, 0]);
        assert!(matches!(zero.resolve(), Err(BenchError::Config(_))));
    }
}
