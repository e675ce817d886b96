//! Root-parallel Monte Carlo tree search for continuous action spaces.
//!
//! * [`mdp`]: environment interface, action boxes, seeding helpers.
//! * [`mcts`]: a single UCT tree with progressive widening of actions and
//!   (optionally) of stochastic successors.
//! * [`root_parallel`]: `K` independent trees from one root state, joined
//!   and reduced to a single action.
//! * [`aggregation`]: the reduction strategies (Max, Most Visited,
//!   Similarity Vote, Similarity Merge and the GP-based GPR2P).
//! * [`gpr`]: exact Gaussian process regression used by GPR2P.
//! * [`environments`]: Mountain Car, Pendulum, Random Teleporter and the
//!   wide / narrow corridor tasks.

pub mod aggregation;
pub mod environments;
pub mod error;
pub mod gpr;
pub mod mcts;
pub mod mdp;
pub mod root_parallel;

pub use aggregation::{
    aggregate, ActionStats, AggregationChoice, ForestStats, Gpr2pConfig, StrategyKind,
};
pub use environments::{EnvName, EnvSpec};
pub use error::{Error, Result};
pub use gpr::{GpModel, KernelParams};
pub use mcts::{DpwParams, SearchParams, SearchTree};
pub use mdp::{ActionBox, Environment, MdpConfig, StateVec, TransitionOutcome};
pub use root_parallel::{plan_step, ParallelPlanSpec, PlanOutcome, PlanTiming};
