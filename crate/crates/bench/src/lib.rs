//! Benchmark harness for root-parallel MCTS aggregation strategies.

pub mod config;
pub mod episode;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod plot;

pub use config::{Preset, StrategyOverrides};
pub use episode::{run_episode, EpisodeRecord};
pub use error::{BenchError, Result};
pub use grid::{run_grid, time_equalized_compare, ExperimentGrid};
pub use metrics::{mrr, rank_cell, steps_metric, RankTable, StepsSummary};
