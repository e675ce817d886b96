//! Single-tree MCTS for continuous actions.
//!
//! Selection uses UCT, new actions enter a node through progressive widening
//! and, for stochastic environments, successor states enter an action edge
//! through double progressive widening. Leaves are evaluated with a
//! uniform-random rollout truncated at the environment's rollout depth.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::ActionStats;
use crate::error::{Error, Result};
use crate::mdp::{Environment, SimRng, StateVec};

pub type NodeId = usize;

const ROOT: NodeId = 0;

/// Successor-set widening (double progressive widening).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpwParams {
    pub d: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// UCT exploration weight `C`.
    pub uct_weight: f64,
    pub pw_c: f64,
    pub pw_alpha: f64,
    /// `None` means plain progressive widening: every edge keeps one successor.
    pub dpw: Option<DpwParams>,
    pub trials: usize,
}

impl SearchParams {
    pub fn new(uct_weight: f64, pw_c: f64, pw_alpha: f64, dpw: Option<DpwParams>, trials: usize) -> Result<Self> {
        let params = Self { uct_weight, pw_c, pw_alpha, dpw, trials };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.uct_weight.is_finite() && self.uct_weight >= 0.0) {
            return bad(format!("uct weight must be >= 0, got {}", self.uct_weight));
        }
        if !(self.pw_c.is_finite() && self.pw_c > 0.0) {
            return bad(format!("pw_c must be > 0, got {}", self.pw_c));
        }
        if !(self.pw_alpha > 0.0 && self.pw_alpha < 1.0) {
            return bad(format!("pw_alpha must lie in (0, 1), got {}", self.pw_alpha));
        }
        if let Some(dpw) = self.dpw {
            if !(dpw.d.is_finite() && dpw.d > 0.0) {
                return bad(format!("dpw_d must be > 0, got {}", dpw.d));
            }
            if !(dpw.beta > 0.0 && dpw.beta < 1.0) {
                return bad(format!("dpw_beta must lie in (0, 1), got {}", dpw.beta));
            }
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        Ok(())
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }
}

/// `Q(s,a) + C·sqrt(2·ln N(s) / N(s,a))`. Visit counts are taken as reals so
/// the formula can be evaluated off the integer lattice.
pub fn uct_score(q: f64, edge_visits: f64, parent_visits: f64, c: f64) -> f64 {
    debug_assert!(edge_visits >= 1.0 && parent_visits >= 1.0);
    if c == 0.0 {
        return q;
    }
    q + c * (2.0 * parent_visits.ln() / edge_visits).sqrt()
}

/// `floor(coeff · visits^exponent)`, the size cap shared by action widening
/// and successor widening.
pub fn widening_allowance(visits: u64, coeff: f64, exponent: f64) -> u64 {
    if visits == 0 {
        return 0;
    }
    // powf is off by an ulp at exact integers (32^0.2); absorb that before flooring.
    let raw = coeff * (visits as f64).powf(exponent);
    (raw * (1.0 + 1e-12)).floor().max(0.0) as u64
}

#[derive(Debug, Clone)]
pub struct Successor {
    pub state: StateVec,
    pub reward: f64,
    pub terminal: bool,
    /// How many times this successor has been followed.
    pub count: u64,
    pub node: NodeId,
}

#[derive(Debug, Clone)]
pub struct ActionEdge {
    pub action: Vec<f64>,
    pub visits: u64,
    /// Running mean of the returns backed up through this edge.
    pub q: f64,
    pub successors: Vec<Successor>,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub state: StateVec,
    pub visits: u64,
    pub children: Vec<ActionEdge>,
    pub is_terminal: bool,
}

impl TreeNode {
    fn new(state: StateVec, is_terminal: bool) -> Self {
        Self { state, visits: 0, children: Vec::new(), is_terminal }
    }

    /// Index of the child maximizing UCT; ties go to the lowest index.
    pub fn select_child(&self, c: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, edge) in self.children.iter().enumerate() {
            let score = uct_score(edge.q, edge.visits.max(1) as f64, self.visits.max(1) as f64, c);
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// One backed-up value: the return credited to `edge` of `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Backup {
    pub node: NodeId,
    pub edge: usize,
    pub value: f64,
}

/// What a single trial touched, root first.
#[derive(Debug, Clone, Default)]
pub struct TrialTrace {
    pub backups: Vec<Backup>,
    pub leaf_value: f64,
}

#[derive(Debug, Clone)]
pub struct SearchTree {
    nodes: Vec<TreeNode>,
    trials: u64,
}

impl SearchTree {
    pub fn new(root_state: StateVec) -> Self {
        Self { nodes: vec![TreeNode::new(root_state, false)], trials: 0 }
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[ROOT]
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    /// Runs `params.trials` trials.
    pub fn search<E: Environment + ?Sized>(&mut self, params: &SearchParams, env: &E, rng: &mut SimRng) {
        for _ in 0..params.trials {
            self.run_trial(params, env, rng);
        }
    }

    /// Executes exactly one selection / expansion / simulation /
    /// backpropagation pass and reports the values it backed up.
    pub fn run_trial<E: Environment + ?Sized>(&mut self, params: &SearchParams, env: &E, rng: &mut SimRng) -> TrialTrace {
        let gamma = env.mdp_config().gamma;
        let mut path: Vec<(NodeId, usize, f64)> = Vec::new();
        let mut node_id = ROOT;

        let leaf_value = loop {
            if self.nodes[node_id].is_terminal {
                break 0.0;
            }

            let node = &self.nodes[node_id];
            let allowance = widening_allowance(node.visits + 1, params.pw_c, params.pw_alpha);
            let edge_idx = if node.children.is_empty() || (node.children.len() as u64) < allowance {
                let action = env.action_box().sample(rng);
                let node = &mut self.nodes[node_id];
                node.children.push(ActionEdge { action, visits: 0, q: 0.0, successors: Vec::new() });
                node.children.len() - 1
            } else {
                node.select_child(params.uct_weight).expect("node has children")
            };

            let edge = &self.nodes[node_id].children[edge_idx];
            let succ_allowance = match params.dpw {
                Some(dpw) => widening_allowance(edge.visits + 1, dpw.d, dpw.beta),
                None => 1,
            };
            let grow = edge.successors.is_empty() || (edge.successors.len() as u64) < succ_allowance;
            let succ_idx = if grow {
                let outcome = env.sample_transition(&self.nodes[node_id].state, &edge.action, rng);
                let child = self.nodes.len();
                self.nodes.push(TreeNode::new(outcome.next_state.clone(), outcome.terminal));
                let edge = &mut self.nodes[node_id].children[edge_idx];
                edge.successors.push(Successor {
                    state: outcome.next_state,
                    reward: outcome.reward,
                    terminal: outcome.terminal,
                    count: 1,
                    node: child,
                });
                edge.successors.len() - 1
            } else {
                let idx = sample_by_count(&edge.successors, rng);
                self.nodes[node_id].children[edge_idx].successors[idx].count += 1;
                idx
            };

            let succ = &self.nodes[node_id].children[edge_idx].successors[succ_idx];
            let (child, reward, terminal) = (succ.node, succ.reward, succ.terminal);
            path.push((node_id, edge_idx, reward));
            node_id = child;

            if grow {
                break if terminal { 0.0 } else { self.rollout(node_id, env, rng) };
            }
        };

        self.nodes[node_id].visits += 1;
        let mut value = leaf_value;
        let mut backups = Vec::with_capacity(path.len());
        for &(nid, eidx, reward) in path.iter().rev() {
            value = reward + gamma * value;
            let node = &mut self.nodes[nid];
            node.visits += 1;
            let edge = &mut node.children[eidx];
            edge.visits += 1;
            edge.q += (value - edge.q) / edge.visits as f64;
            backups.push(Backup { node: nid, edge: eidx, value });
        }
        backups.reverse();
        self.trials += 1;
        TrialTrace { backups, leaf_value }
    }

    fn rollout<E: Environment + ?Sized>(&self, from: NodeId, env: &E, rng: &mut SimRng) -> f64 {
        let cfg = env.mdp_config();
        let mut state = self.nodes[from].state.clone();
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..cfg.rollout_depth {
            let action = env.action_box().sample(rng);
            let outcome = env.sample_transition(&state, &action, rng);
            total += discount * outcome.reward;
            discount *= cfg.gamma;
            if outcome.terminal {
                return total;
            }
            state = outcome.next_state;
        }
        total + discount * env.leaf_value(&state)
    }

    /// `(action, Q, N)` for every root child, in insertion order.
    pub fn root_action_stats(&self, tree_index: usize) -> Result<Vec<ActionStats>> {
        let root = self.root();
        if root.children.is_empty() {
            return Err(Error::NoSampledActions);
        }
        Ok(root
            .children
            .iter()
            .map(|e| ActionStats { action: e.action.clone(), q: e.q, visits: e.visits, tree_index })
            .collect())
    }

    /// Action of the root child with the highest Q (lowest index on ties).
    pub fn best_root_action(&self) -> Option<&[f64]> {
        self.root().select_child(0.0).map(|i| self.root().children[i].action.as_slice())
    }
}

fn sample_by_count(successors: &[Successor], rng: &mut SimRng) -> usize {
    let total: u64 = successors.iter().map(|s| s.count).sum();
    let mut pick = rng.gen_range(0..total);
    for (i, s) in successors.iter().enumerate() {
        if pick < s.count {
            return i;
        }
        pick -= s.count;
    }
    successors.len() - 1
}
