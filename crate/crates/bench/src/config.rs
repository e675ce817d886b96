//! Per-environment presets.
//!
//! A preset is a TOML file with top-level MDP settings, one table per
//! planner component and an `[env]` table of named dynamics parameters:
//!
//! ```toml
//! environment = "narrow_corridor"
//! gamma = 1.0
//! max_episode_steps = 50
//! rollout_depth = 3
//! hold_steps = 1                      # optional, default 1
//! workers = 8
//! seeds = 30
//! trial_budgets = [15, 30, 60, 120]
//! alt_trial_budgets = [15, 20, 30, 40] # optional
//!
//! [mcts]
//! uct_weight = 10.0
//! pw_c = 2.0
//! pw_alpha = 0.7
//! dpw_d = 1.2                         # dpw_d / dpw_beta: both or neither
//! dpw_beta = 0.2
//!
//! [similarity_vote]
//! phi = 25.0
//! offset_epsilon = 1.0                # optional, default 1.0
//!
//! [similarity_merge]
//! phi = 1.0
//!
//! [gpr2p]
//! signal_variance = 0.284
//! length_scale = 2.61
//! noise_variance = 0.899
//! tau = [1, 1, 1, 1]                  # one threshold per trial budget
//! candidates = 1024                   # optional, default by action dimension
//!
//! [env]                               # optional overrides of dynamics parameters
//! corridor_half_width = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use rpmcts::aggregation::{AggregationChoice, Gpr2pConfig, StrategyKind};
use rpmcts::environments::{EnvName, EnvSpec};
use rpmcts::gpr::KernelParams;
use rpmcts::mcts::{DpwParams, SearchParams};
use rpmcts::mdp::{Environment, MdpConfig};
use serde::Deserialize;

use crate::error::{BenchError, Result};

const EMBEDDED: [(&str, &str); 6] = [
    ("mountain_car", include_str!("../presets/mountain_car.toml")),
    ("pendulum", include_str!("../presets/pendulum.toml")),
    ("random_teleporter", include_str!("../presets/random_teleporter.toml")),
    ("wide_corridor", include_str!("../presets/wide_corridor.toml")),
    ("narrow_corridor", include_str!("../presets/narrow_corridor.toml")),
    ("lunar_lander", include_str!("../presets/lunar_lander.toml")),
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MctsSection {
    pub uct_weight: f64,
    pub pw_c: f64,
    pub pw_alpha: f64,
    pub dpw_d: Option<f64>,
    pub dpw_beta: Option<f64>,
}

fn default_offset() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteSection {
    pub phi: f64,
    #[serde(default = "default_offset")]
    pub offset_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeSection {
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GprSection {
    pub signal_variance: f64,
    pub length_scale: f64,
    pub noise_variance: f64,
    pub tau: Vec<u64>,
    pub candidates: Option<usize>,
}

fn default_hold() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preset {
    pub environment: String,
    pub gamma: f64,
    pub max_episode_steps: usize,
    pub rollout_depth: usize,
    #[serde(default = "default_hold")]
    pub hold_steps: usize,
    pub workers: usize,
    pub seeds: usize,
    pub trial_budgets: Vec<usize>,
    #[serde(default)]
    pub alt_trial_budgets: Option<Vec<usize>>,
    pub mcts: MctsSection,
    pub similarity_vote: VoteSection,
    pub similarity_merge: MergeSection,
    pub gpr2p: GprSection,
    #[serde(default)]
    pub env: BTreeMap<String, f64>,
}

/// Command-line overrides of strategy hyperparameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StrategyOverrides {
    pub phi: Option<f64>,
    pub signal_variance: Option<f64>,
    pub length_scale: Option<f64>,
    pub noise_variance: Option<f64>,
    pub tau: Option<u64>,
    pub candidates: Option<usize>,
}

impl Preset {
    pub fn parse(text: &str) -> Result<Self> {
        let preset: Preset = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        preset.validate()?;
        Ok(preset)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
    }

    /// The preset shipped for `name` (including `lunar_lander`, whose
    /// environment cannot be instantiated).
    pub fn embedded(name: &str) -> Result<Self> {
        let (_, text) = EMBEDDED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| BenchError::Config(format!("no preset for environment '{name}'")))?;
        Self::parse(text)
    }

    /// Loads `<dir>/<name>.toml` when `dir` is given, the embedded preset
    /// otherwise. A file path is accepted as-is.
    pub fn resolve(name: &str, config: Option<&Path>) -> Result<Self> {
        let preset = match config {
            None => Self::embedded(name)?,
            Some(p) if p.is_dir() => Self::load(&p.join(format!("{name}.toml")))?,
            Some(p) => Self::load(p)?,
        };
        if preset.environment != name {
            return Err(BenchError::Config(format!(
                "preset describes '{}' but '{name}' was requested",
                preset.environment
            )));
        }
        Ok(preset)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.trial_budgets.is_empty() || self.trial_budgets.contains(&0) {
            return bad("trial_budgets must be a non-empty list of positive integers".into());
        }
        if self.gpr2p.tau.len() != self.trial_budgets.len() {
            return bad(format!(
                "gpr2p.tau has {} entries but there are {} trial budgets",
                self.gpr2p.tau.len(),
                self.trial_budgets.len()
            ));
        }
        if let Some(alt) = &self.alt_trial_budgets {
            if alt.len() != self.trial_budgets.len() || alt.contains(&0) {
                return bad("alt_trial_budgets must pair one-to-one with trial_budgets".into());
            }
        }
        if self.mcts.dpw_d.is_some() != self.mcts.dpw_beta.is_some() {
            return bad("dpw_d and dpw_beta must be given together".into());
        }
        if self.workers == 0 || self.seeds == 0 {
            return bad("workers and seeds must be positive".into());
        }
        Ok(())
    }

    pub fn env_name(&self) -> Result<EnvName> {
        self.environment.parse().map_err(|e: rpmcts::Error| BenchError::Config(e.to_string()))
    }

    /// Instantiates the environment with this preset's settings.
    pub fn environment(&self) -> Result<EnvSpec> {
        let name = self.env_name()?;
        let mdp = MdpConfig::new(self.gamma, self.max_episode_steps, self.rollout_depth)
            .map_err(|e| BenchError::Config(e.to_string()))?;
        EnvSpec::preset(name)
            .with_overrides(mdp, self.hold_steps, &self.env)
            .map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn search_params(&self, trials: usize) -> Result<SearchParams> {
        let dpw = match (self.mcts.dpw_d, self.mcts.dpw_beta) {
            (Some(d), Some(beta)) => Some(DpwParams { d, beta }),
            _ => None,
        };
        SearchParams::new(self.mcts.uct_weight, self.mcts.pw_c, self.mcts.pw_alpha, dpw, trials)
            .map_err(|e| BenchError::Config(e.to_string()))
    }

    /// Visit threshold for `budget`: the paired entry of either budget
    /// schedule, else the entry of the largest listed budget below it (the
    /// first entry for budgets under every listed one).
    pub fn tau_for(&self, budget: usize) -> u64 {
        let schedules = std::iter::once(&self.trial_budgets).chain(self.alt_trial_budgets.as_ref());
        for schedule in schedules.clone() {
            if let Some(i) = schedule.iter().position(|b| *b == budget) {
                return self.gpr2p.tau[i];
            }
        }
        self.trial_budgets
            .iter()
            .enumerate()
            .filter(|(_, b)| **b <= budget)
            .max_by_key(|(_, b)| **b)
            .map_or(self.gpr2p.tau[0], |(i, _)| self.gpr2p.tau[i])
    }

    /// The fully parameterized strategy for `kind` at `budget`.
    pub fn strategy(&self, kind: StrategyKind, budget: usize, overrides: &StrategyOverrides) -> Result<AggregationChoice> {
        let choice = match kind {
            StrategyKind::SingleThread => AggregationChoice::SingleThread,
            StrategyKind::Max => AggregationChoice::Max,
            StrategyKind::MostVisited => AggregationChoice::MostVisited,
            StrategyKind::SimilarityVote => AggregationChoice::SimilarityVote {
                phi: overrides.phi.unwrap_or(self.similarity_vote.phi),
                offset_epsilon: self.similarity_vote.offset_epsilon,
            },
            StrategyKind::SimilarityMerge => {
                AggregationChoice::SimilarityMerge { phi: overrides.phi.unwrap_or(self.similarity_merge.phi) }
            }
            StrategyKind::Gpr2p => {
                let g = &self.gpr2p;
                let kernel = KernelParams::new(
                    overrides.signal_variance.unwrap_or(g.signal_variance),
                    overrides.length_scale.unwrap_or(g.length_scale),
                    overrides.noise_variance.unwrap_or(g.noise_variance),
                )
                .map_err(|e| BenchError::Config(e.to_string()))?;
                let dim = self.environment()?.action_box().dim();
                AggregationChoice::Gpr2p(Gpr2pConfig {
                    kernel,
                    tau: overrides.tau.unwrap_or_else(|| self.tau_for(budget)),
                    candidates: overrides
                        .candidates
                        .or(g.candidates)
                        .unwrap_or_else(|| Gpr2pConfig::default_candidates(dim)),
                })
            }
        };
        choice.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(choice)
    }
}
