//! Action-selection strategies for root-parallel search.
//!
//! Every strategy consumes the root statistics of all trees ([`ForestStats`])
//! and returns one action. Ties are broken towards the lowest
//! `(tree_index, insertion order)` position so results are reproducible.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{squared_distance, Centering, GpModel, KernelParams};
use crate::mdp::{rng_from_seed, ActionBox};

/// Root statistics of one sampled action in one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionStats {
    pub action: Vec<f64>,
    /// Mean return `Q(s0, a)`.
    pub q: f64,
    /// Visit count `N(s0, a)`.
    pub visits: u64,
    pub tree_index: usize,
}

/// Root statistics of every tree built for one planning step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForestStats {
    pub per_tree: Vec<Vec<ActionStats>>,
    /// Wall-clock build time of each tree, in seconds.
    pub wall_times: Vec<f64>,
}

impl ForestStats {
    pub fn new(per_tree: Vec<Vec<ActionStats>>) -> Self {
        let wall_times = vec![0.0; per_tree.len()];
        Self { per_tree, wall_times }
    }

    /// All entries in `(tree_index, insertion order)` order.
    pub fn entries(&self) -> impl Iterator<Item = &ActionStats> {
        self.per_tree.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.per_tree.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    SimilarityVote,
    SimilarityMerge,
    Max,
    MostVisited,
    Gpr2p,
    SingleThread,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 6] = [
        StrategyKind::SimilarityVote,
        StrategyKind::SimilarityMerge,
        StrategyKind::Max,
        StrategyKind::MostVisited,
        StrategyKind::Gpr2p,
        StrategyKind::SingleThread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::SingleThread => "single_thread",
            StrategyKind::Max => "max",
            StrategyKind::MostVisited => "most_visited",
            StrategyKind::SimilarityVote => "similarity_vote",
            StrategyKind::SimilarityMerge => "similarity_merge",
            StrategyKind::Gpr2p => "gpr2p",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown strategy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gpr2pConfig {
    pub kernel: KernelParams,
    /// Minimum root visit count for an action to enter the regression.
    pub tau: u64,
    /// Number of quasi-random candidates scanned besides the sampled actions.
    pub candidates: usize,
}

impl Gpr2pConfig {
    /// 1024 candidates up to two action dimensions, 4096 beyond.
    pub fn default_candidates(dim: usize) -> usize {
        if dim <= 2 {
            1024
        } else {
            4096
        }
    }
}

/// A strategy together with exactly the parameters it needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AggregationChoice {
    SingleThread,
    Max,
    MostVisited,
    SimilarityVote { phi: f64, offset_epsilon: f64 },
    SimilarityMerge { phi: f64 },
    Gpr2p(Gpr2pConfig),
}

impl AggregationChoice {
    pub fn kind(&self) -> StrategyKind {
        match self {
            AggregationChoice::SingleThread => StrategyKind::SingleThread,
            AggregationChoice::Max => StrategyKind::Max,
            AggregationChoice::MostVisited => StrategyKind::MostVisited,
            AggregationChoice::SimilarityVote { .. } => StrategyKind::SimilarityVote,
            AggregationChoice::SimilarityMerge { .. } => StrategyKind::SimilarityMerge,
            AggregationChoice::Gpr2p(_) => StrategyKind::Gpr2p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregationChoice::SimilarityVote { phi, offset_epsilon } => {
                check_phi(phi)?;
                if !(offset_epsilon.is_finite() && offset_epsilon >= 0.0) {
                    return Err(Error::InvalidParameter(format!("vote offset must be >= 0, got {offset_epsilon}")));
                }
            }
            AggregationChoice::SimilarityMerge { phi } => check_phi(phi)?,
            AggregationChoice::Gpr2p(cfg) => {
                cfg.kernel.validate()?;
                if cfg.tau == 0 || cfg.candidates == 0 {
                    return Err(Error::InvalidParameter("gpr2p needs tau >= 1 and candidates >= 1".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && !phi.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("phi must be > 0, got {phi}")))
    }
}

/// Result of one aggregation call.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub action: Vec<f64>,
    /// Present for GPR2P only.
    pub gp: Option<GpDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpDiagnostics {
    pub train_points: usize,
    pub posterior_mean: f64,
    pub posterior_variance: f64,
    /// No action met the visit threshold and Max was used instead.
    pub fell_back: bool,
}

/// Dispatches to the strategy named by `choice`.
pub fn aggregate(choice: &AggregationChoice, forest: &ForestStats, action_box: &ActionBox, seed: u64) -> Result<Aggregated> {
    let plain = |action: Result<Vec<f64>>| action.map(|action| Aggregated { action, gp: None });
    let result = match *choice {
        AggregationChoice::SingleThread | AggregationChoice::Max => plain(select_max(forest)),
        AggregationChoice::MostVisited => plain(select_most_visited(forest)),
        AggregationChoice::SimilarityVote { phi, offset_epsilon } => {
            plain(select_similarity_vote(forest, phi, offset_epsilon))
        }
        AggregationChoice::SimilarityMerge { phi } => plain(select_similarity_merge(forest, phi)),
        AggregationChoice::Gpr2p(cfg) => select_gpr2p(forest, &cfg, action_box, seed),
    };
    result.map_err(|e| Error::Aggregation { strategy: choice.kind().name(), source: Box::new(e) })
}

fn argmax_by<'a, I>(entries: I, key: impl Fn(&ActionStats) -> f64) -> Option<&'a ActionStats>
where
    I: IntoIterator<Item = &'a ActionStats>,
{
    let mut best: Option<(&ActionStats, f64)> = None;
    for e in entries {
        let k = key(e);
        if best.map_or(true, |(_, b)| k > b) {
            best = Some((e, k));
        }
    }
    best.map(|(e, _)| e)
}

/// Entry with the highest `Q` over all trees.
pub fn select_max(forest: &ForestStats) -> Result<Vec<f64>> {
    argmax_by(forest.entries(), |e| e.q).map(|e| e.action.clone()).ok_or(Error::NoSampledActions)
}

/// Entry with the highest visit count over all trees.
pub fn select_most_visited(forest: &ForestStats) -> Result<Vec<f64>> {
    argmax_by(forest.entries(), |e| e.visits as f64).map(|e| e.action.clone()).ok_or(Error::NoSampledActions)
}

/// `K_ij = exp(−φ ‖a_i − a_j‖²)`.
pub fn similarity_matrix(actions: &[&[f64]], phi: f64) -> Vec<Vec<f64>> {
    let n = actions.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = (-phi * squared_distance(actions[i], actions[j])).exp();
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Intermediate quantities of Similarity Vote, exposed for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteScores {
    /// One champion per non-empty tree.
    pub champions: Vec<ActionStats>,
    /// Champion values after the optional shift.
    pub values: Vec<f64>,
    /// `K v`.
    pub scores: Vec<f64>,
    /// Whether the negative-value offset was applied.
    pub shifted: bool,
}

pub fn similarity_vote_scores(forest: &ForestStats, phi: f64, offset_epsilon: f64) -> Result<VoteScores> {
    let champions: Vec<ActionStats> =
        forest.per_tree.iter().filter_map(|tree| argmax_by(tree, |e| e.q).cloned()).collect();
    if champions.is_empty() {
        return Err(Error::NoSampledActions);
    }
    let min = champions.iter().map(|c| c.q).fold(f64::INFINITY, f64::min);
    let shifted = min < 0.0;
    let values: Vec<f64> = champions
        .iter()
        .map(|c| if shifted { c.q - min + offset_epsilon } else { c.q })
        .collect();
    let actions: Vec<&[f64]> = champions.iter().map(|c| c.action.as_slice()).collect();
    let k = similarity_matrix(&actions, phi);
    let scores = k.iter().map(|row| row.iter().zip(&values).map(|(a, b)| a * b).sum()).collect();
    Ok(VoteScores { champions, values, scores, shifted })
}

/// Champion-per-tree voting weighted by action similarity.
pub fn select_similarity_vote(forest: &ForestStats, phi: f64, offset_epsilon: f64) -> Result<Vec<f64>> {
    let vote = similarity_vote_scores(forest, phi, offset_epsilon)?;
    let best = argmax_index(&vote.scores).expect("non-empty");
    Ok(vote.champions[best].action.clone())
}

/// How the similarity-weighted sums of Similarity Merge are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    /// Sum the contributions of every other action.
    #[default]
    Accumulate,
    /// Keep only the contribution of the last other action, reproducing a
    /// literal reading of the loop that reassigns inside the inner iteration.
    Overwrite,
}

/// `(N_sim, Q_sim)` for every entry of `entries`.
pub fn similarity_merge_scores(entries: &[&ActionStats], phi: f64, mode: MergeMode) -> Vec<(f64, f64)> {
    let actions: Vec<&[f64]> = entries.iter().map(|e| e.action.as_slice()).collect();
    let k = similarity_matrix(&actions, phi);
    entries
        .iter()
        .enumerate()
        .map(|(i, ei)| {
            let own_n = ei.visits as f64;
            let own = own_n * ei.q;
            let (mut n_sim, mut weighted) = (own_n, own);
            for (j, ej) in entries.iter().enumerate() {
                if i == j {
                    continue;
                }
                let w = k[i][j] * ej.visits as f64;
                match mode {
                    MergeMode::Accumulate => {
                        n_sim += w;
                        weighted += w * ej.q;
                    }
                    MergeMode::Overwrite => {
                        n_sim = own_n + w;
                        weighted = own + w * ej.q;
                    }
                }
            }
            (n_sim, weighted / n_sim)
        })
        .collect()
}

/// Similarity Merge over the union of all sampled root actions.
pub fn select_similarity_merge(forest: &ForestStats, phi: f64) -> Result<Vec<f64>> {
    select_similarity_merge_with(forest, phi, MergeMode::Accumulate)
}

pub fn select_similarity_merge_with(forest: &ForestStats, phi: f64, mode: MergeMode) -> Result<Vec<f64>> {
    let entries: Vec<&ActionStats> = forest.entries().collect();
    if entries.is_empty() {
        return Err(Error::NoSampledActions);
    }
    let q_sim: Vec<f64> = similarity_merge_scores(&entries, phi, mode).into_iter().map(|(_, q)| q).collect();
    Ok(entries[argmax_index(&q_sim).expect("non-empty")].action.clone())
}

fn argmax_index(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let (mut result, mut scale) = (0.0, inv);
    while index > 0 {
        result += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    result
}

/// `count` points of a Halton sequence in the unit cube, rotated by a seeded
/// random shift (Cranley–Patterson) and mapped onto `action_box`.
pub fn candidate_points(action_box: &ActionBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = action_box.dim();
    assert!(dim <= PRIMES.len(), "candidate generation supports up to {} dimensions", PRIMES.len());
    let mut rng = rng_from_seed(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>()).collect();
    (1..=count as u64)
        .map(|i| {
            let unit: Vec<f64> = (0..dim).map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract()).collect();
            action_box.from_unit(&unit)
        })
        .collect()
}

/// GP regression over visit-filtered root actions; returns the candidate
/// with the highest posterior mean.
///
/// Candidates are the retained sampled actions followed by
/// `cfg.candidates` quasi-random points of the action box, so an action
/// that was never tried can win. When no action reaches the visit
/// threshold this degrades to [`select_max`] and flags the fallback.
pub fn select_gpr2p(forest: &ForestStats, cfg: &Gpr2pConfig, action_box: &ActionBox, seed: u64) -> Result<Aggregated> {
    if forest.is_empty() {
        return Err(Error::NoSampledActions);
    }
    let valid: Vec<&ActionStats> = forest.entries().filter(|e| e.visits >= cfg.tau).collect();
    if valid.is_empty() {
        warn!("gpr2p: no root action reached tau = {}, falling back to max", cfg.tau);
        let action = select_max(forest)?;
        return Ok(Aggregated {
            action,
            gp: Some(GpDiagnostics { train_points: 0, posterior_mean: f64::NAN, posterior_variance: f64::NAN, fell_back: true }),
        });
    }

    let inputs: Vec<Vec<f64>> = valid.iter().map(|e| e.action.clone()).collect();
    let targets: Vec<f64> = valid.iter().map(|e| e.q).collect();
    let model = GpModel::fit_with(&inputs, &targets, cfg.kernel, Centering::Mean)?;

    let extra = candidate_points(action_box, cfg.candidates, seed);
    let (mut best, mut best_mean) = (inputs[0].as_slice(), f64::NEG_INFINITY);
    for cand in inputs.iter().chain(&extra) {
        let mean = model.posterior_mean(cand);
        if mean > best_mean {
            best = cand;
            best_mean = mean;
        }
    }
    let action = action_box.clamp(best);
    let posterior_variance = model.posterior_variance(&action);
    Ok(Aggregated {
        action,
        gp: Some(GpDiagnostics { train_points: model.len(), posterior_mean: best_mean, posterior_variance, fell_back: false }),
    })
}
