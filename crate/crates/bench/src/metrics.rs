//! Per-cell statistics and mean reciprocal rank.

use std::collections::{BTreeMap, BTreeSet};

use rpmcts::aggregation::StrategyKind;
use serde::Serialize;

use crate::error::{BenchError, Result};
use crate::grid::CsvRow;

/// 97.5% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepsSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over √n; zero for a single sample.
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `max_episode_steps - mean`, the plotted value (higher is better).
    pub transformed: f64,
}

/// Mean, standard error and 95% normal-approximation interval of the step
/// counts. `None` for an empty cell.
pub fn steps_metric(steps: &[usize], max_episode_steps: usize) -> Option<StepsSummary> {
    let (mean, std_err) = mean_and_se(&steps.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
    Some(StepsSummary {
        n: steps.len(),
        mean,
        std_err,
        ci_low: mean - Z_95 * std_err,
        ci_high: mean + Z_95 * std_err,
        transformed: max_episode_steps as f64 - mean,
    })
}

pub fn mean_and_se(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

/// `√(se_a² + se_b²)`, the standard error of a difference of two means.
pub fn pooled_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub env: String,
    pub strategy: String,
    pub trial_budget: usize,
    pub steps: StepsSummary,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_inference_seconds: f64,
    pub mean_total_seconds: f64,
}

/// Groups rows by (env, strategy, budget). `max_steps` maps each
/// environment to its step limit.
pub fn summarize(rows: &[CsvRow], max_steps: &BTreeMap<String, usize>) -> Result<Vec<CellSummary>> {
    let mut cells: BTreeMap<(String, usize, usize), Vec<&CsvRow>> = BTreeMap::new();
    for row in rows {
        let order = strategy_order(&row.strategy)?;
        cells.entry((row.env.clone(), row.trial_budget, order)).or_default().push(row);
    }
    cells
        .into_values()
        .map(|group| {
            let first = group[0];
            let limit = *max_steps
                .get(&first.env)
                .ok_or_else(|| BenchError::Config(format!("no step limit known for '{}'", first.env)))?;
            let steps: Vec<usize> = group.iter().map(|r| r.steps).collect();
            let n = group.len() as f64;
            Ok(CellSummary {
                env: first.env.clone(),
                strategy: first.strategy.clone(),
                trial_budget: first.trial_budget,
                steps: steps_metric(&steps, limit).expect("groups are non-empty"),
                success_rate: group.iter().filter(|r| r.success).count() as f64 / n,
                mean_return: group.iter().map(|r| r.final_return).sum::<f64>() / n,
                mean_inference_seconds: group.iter().map(|r| r.inference_seconds).sum::<f64>() / n,
                mean_total_seconds: group.iter().map(|r| r.total_seconds).sum::<f64>() / n,
            })
        })
        .collect()
}

/// Position of a strategy in the fixed legend order.
pub fn strategy_order(name: &str) -> Result<usize> {
    let kind: StrategyKind = name.parse().map_err(|e: rpmcts::Error| BenchError::Runtime(e.to_string()))?;
    Ok(StrategyKind::ALL.iter().position(|k| *k == kind).expect("ALL lists every kind"))
}

/// Competition ranking ("1224"): equal scores share the best rank they
/// cover. Lower scores rank first.
pub fn rank_cell(scores: &[(String, f64)]) -> BTreeMap<String, usize> {
    scores
        .iter()
        .map(|(name, s)| (name.clone(), 1 + scores.iter().filter(|(_, other)| other < s).count()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedCell {
    pub task: String,
    pub trial_budget: usize,
    pub ranks: BTreeMap<String, usize>,
    pub rr: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub strategies: Vec<String>,
    pub cells: Vec<RankedCell>,
    /// Mean reciprocal rank of each strategy over one task's cells.
    pub per_task: BTreeMap<String, BTreeMap<String, f64>>,
    /// Mean of the per-task values.
    pub overall: BTreeMap<String, f64>,
}

/// Reciprocal ranks averaged per task, then across tasks. Every cell must
/// rank the same strategy set.
pub fn mrr(cells: &[(String, usize, BTreeMap<String, usize>)]) -> Result<RankTable> {
    let first = cells.first().ok_or_else(|| BenchError::Runtime("no ranked cells".into()))?;
    let names: BTreeSet<&String> = first.2.keys().collect();
    let n = names.len();
    let mut ranked = Vec::with_capacity(cells.len());
    let mut by_task: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (task, budget, ranks) in cells {
        if ranks.keys().collect::<BTreeSet<_>>() != names {
            return Err(BenchError::Runtime(format!("cell ({task}, {budget}) ranks a different strategy set")));
        }
        if let Some((s, r)) = ranks.iter().find(|(_, r)| **r == 0 || **r > n) {
            return Err(BenchError::Runtime(format!("rank {r} of '{s}' outside 1..={n}")));
        }
        by_task.entry(task.clone()).or_default().push(ranked.len());
        ranked.push(RankedCell {
            task: task.clone(),
            trial_budget: *budget,
            ranks: ranks.clone(),
            rr: ranks.iter().map(|(s, r)| (s.clone(), 1.0 / *r as f64)).collect(),
        });
    }
    let per_task: BTreeMap<String, BTreeMap<String, f64>> = by_task
        .iter()
        .map(|(task, idx)| {
            let means = names
                .iter()
                .map(|s| ((*s).clone(), idx.iter().map(|&i| ranked[i].rr[*s]).sum::<f64>() / idx.len() as f64))
                .collect();
            (task.clone(), means)
        })
        .collect();
    let overall = names
        .iter()
        .map(|s| ((*s).clone(), per_task.values().map(|m| m[*s]).sum::<f64>() / per_task.len() as f64))
        .collect();
    Ok(RankTable { strategies: names.into_iter().cloned().collect(), cells: ranked, per_task, overall })
}

/// Ranks strategies in every (env, budget) cell by mean step count.
pub fn rank_summaries(summaries: &[CellSummary]) -> Result<RankTable> {
    let mut cells: BTreeMap<(String, usize), Vec<(String, f64)>> = BTreeMap::new();
    for s in summaries {
        cells.entry((s.env.clone(), s.trial_budget)).or_default().push((s.strategy.clone(), s.steps.mean));
    }
    let inputs: Vec<_> = cells.into_iter().map(|((env, b), scores)| (env, b, rank_cell(&scores))).collect();
    mrr(&inputs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub cells: Vec<CellSummary>,
    pub ranking: RankTable,
}
