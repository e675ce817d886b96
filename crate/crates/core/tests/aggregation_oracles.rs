use proptest::prelude::*;
use rpmcts::aggregation::{
    select_gpr2p, select_max, select_most_visited, select_similarity_merge, select_similarity_vote, similarity_merge_scores,
    ActionStats, ForestStats, Gpr2pConfig, MergeMode,
};
use rpmcts::gpr::{Centering, GpModel, KernelParams};
use rpmcts::mdp::ActionBox;

fn naive_kernel(a: &[f64], b: &[f64], phi: f64) -> f64 {
    let mut d2 = 0.0;
    for k in 0..a.len() {
        d2 += (a[k] - b[k]) * (a[k] - b[k]);
    }
    (-phi * d2).exp()
}

fn flatten(forest: &ForestStats) -> Vec<ActionStats> {
    let mut all = Vec::new();
    for tree in &forest.per_tree {
        for e in tree {
            all.push(e.clone());
        }
    }
    all
}

fn naive_max(forest: &ForestStats) -> Vec<f64> {
    let all = flatten(forest);
    let mut best = 0;
    for i in 1..all.len() {
        if all[i].q > all[best].q {
            best = i;
        }
    }
    all[best].action.clone()
}

fn naive_most_visited(forest: &ForestStats) -> Vec<f64> {
    let all = flatten(forest);
    let mut best = 0;
    for i in 1..all.len() {
        if all[i].visits > all[best].visits {
            best = i;
        }
    }
    all[best].action.clone()
}

fn naive_vote(forest: &ForestStats, phi: f64, eps: f64) -> Vec<f64> {
    let mut champs: Vec<ActionStats> = Vec::new();
    for tree in &forest.per_tree {
        let mut best: Option<&ActionStats> = None;
        for e in tree {
            if best.is_none() || e.q > best.unwrap().q {
                best = Some(e);
            }
        }
        if let Some(b) = best {
            champs.push(b.clone());
        }
    }
    let mut min = f64::INFINITY;
    for c in &champs {
        if c.q < min {
            min = c.q;
        }
    }
    let mut values = Vec::new();
    for c in &champs {
        values.push(if min < 0.0 { c.q - min + eps } else { c.q });
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for i in 0..champs.len() {
        let mut score = 0.0;
        for j in 0..champs.len() {
            let k = if i == j { 1.0 } else { naive_kernel(&champs[i].action, &champs[j].action, phi) };
            score += k * values[j];
        }
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    champs[best].action.clone()
}

fn naive_merge(forest: &ForestStats, phi: f64) -> Vec<f64> {
    let all = flatten(forest);
    let mut best = 0;
    let mut best_q = f64::NEG_INFINITY;
    for i in 0..all.len() {
        let mut n = all[i].visits as f64;
        let mut s = all[i].visits as f64 * all[i].q;
        for j in 0..all.len() {
            if j != i {
                let w = naive_kernel(&all[i].action, &all[j].action, phi) * all[j].visits as f64;
                n += w;
                s += w * all[j].q;
            }
        }
        if s / n > best_q {
            best = i;
            best_q = s / n;
        }
    }
    all[best].action.clone()
}

fn forest_strategy(dim: usize) -> impl Strategy<Value = ForestStats> {
    let entry = (prop::collection::vec(-1.0f64..1.0, dim), -30.0f64..10.0, 1u64..20);
    prop::collection::vec(prop::collection::vec(entry, 1..=6), 1..=8).prop_map(|trees| {
        ForestStats::new(
            trees
                .into_iter()
                .enumerate()
                .map(|(t, es)| {
                    es.into_iter().map(|(action, q, visits)| ActionStats { action, q, visits, tree_index: t }).collect()
                })
                .collect(),
        )
    })
}

/// Forests whose actions are pairwise at least 0.05 apart.
fn separated(forest: &ForestStats) -> bool {
    let all = flatten(forest);
    (0..all.len()).all(|i| (0..i).all(|j| naive_kernel(&all[i].action, &all[j].action, 1.0) < (-0.0025f64).exp()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn strategies_match_naive_oracles(forest in (1usize..=3).prop_flat_map(forest_strategy), phi in 0.1f64..50.0, eps in 0.1f64..2.0) {
        prop_assert_eq!(select_max(&forest).unwrap(), naive_max(&forest));
        prop_assert_eq!(select_most_visited(&forest).unwrap(), naive_most_visited(&forest));
        prop_assert_eq!(select_similarity_vote(&forest, phi, eps).unwrap(), naive_vote(&forest, phi, eps));
        prop_assert_eq!(select_similarity_merge(&forest, phi).unwrap(), naive_merge(&forest, phi));
    }

    #[test]
    fn sharp_merge_is_max(forest in (1usize..=2).prop_flat_map(forest_strategy)) {
        prop_assume!(separated(&forest));
        prop_assert_eq!(select_similarity_merge(&forest, 1e6).unwrap(), select_max(&forest).unwrap());
    }

    #[test]
    fn merge_weights_are_positive(forest in forest_strategy(2), phi in 0.0f64..10.0) {
        let all: Vec<&ActionStats> = forest.entries().collect();
        let (lo, hi) = all.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), e| (l.min(e.q), h.max(e.q)));
        for mode in [MergeMode::Accumulate, MergeMode::Overwrite] {
            for ((n, q), e) in similarity_merge_scores(&all, phi, mode).into_iter().zip(&all) {
                prop_assert!(n >= e.visits as f64);
                // A weighted mean of the Q values stays within their range.
                prop_assert!(q >= lo - 1e-9 && q <= hi + 1e-9);
            }
        }
    }

    #[test]
    fn gpr2p_stays_in_box_and_maximizes_over_candidates(forest in forest_strategy(2), seed in any::<u64>(), tau in 1u64..25) {
        let bx = ActionBox::symmetric(2, 1.0).unwrap();
        let cfg = Gpr2pConfig { kernel: KernelParams::new(0.284, 2.61, 0.899).unwrap(), tau, candidates: 64 };
        let out = select_gpr2p(&forest, &cfg, &bx, seed).unwrap();
        prop_assert!(bx.contains(&out.action));
        let diag = out.gp.unwrap();
        let valid: Vec<&ActionStats> = forest.entries().filter(|e| e.visits >= tau).collect();
        if valid.is_empty() {
            prop_assert!(diag.fell_back);
            prop_assert_eq!(out.action, select_max(&forest).unwrap());
        } else {
            prop_assert!(!diag.fell_back);
            prop_assert_eq!(diag.train_points, valid.len());
            let x: Vec<Vec<f64>> = valid.iter().map(|e| e.action.clone()).collect();
            let y: Vec<f64> = valid.iter().map(|e| e.q).collect();
            let model = GpModel::fit_with(&x, &y, cfg.kernel, Centering::Mean).unwrap();
            // No sampled action scores above the selected one.
            let chosen = model.posterior_mean(&out.action);
            for a in &x {
                prop_assert!(model.posterior_mean(a) <= chosen + 1e-9);
            }
            let again = select_gpr2p(&forest, &cfg, &bx, seed).unwrap();
            prop_assert_eq!(again.action, out.action);
        }
    }

    #[test]
    fn worker_permutation_invariance(forest in forest_strategy(2), rotate in 0usize..8) {
        let mut trees = forest.per_tree.clone();
        let r = rotate % trees.len();
        trees.rotate_left(r);
        let permuted = ForestStats::new(trees);
        let q_of = |a: &[f64]| flatten(&forest).into_iter().find(|e| e.action == a).unwrap();
        let best_q = flatten(&forest).iter().map(|e| e.q).fold(f64::NEG_INFINITY, f64::max);
        let most = flatten(&forest).iter().map(|e| e.visits).max().unwrap();
        prop_assert_eq!(q_of(&select_max(&permuted).unwrap()).q, best_q);
        prop_assert_eq!(q_of(&select_most_visited(&permuted).unwrap()).visits, most);

        let all: Vec<&ActionStats> = forest.entries().collect();
        let scores = similarity_merge_scores(&all, 1.0, MergeMode::Accumulate);
        let merged_q = |a: &[f64]| scores[all.iter().position(|e| e.action == a).unwrap()].1;
        let a = select_similarity_merge(&forest, 1.0).unwrap();
        let b = select_similarity_merge(&permuted, 1.0).unwrap();
        prop_assert!((merged_q(&a) - merged_q(&b)).abs() < 1e-9);

        let bx = ActionBox::symmetric(2, 1.0).unwrap();
        let cfg = Gpr2pConfig { kernel: KernelParams::new(0.284, 2.61, 0.899).unwrap(), tau: 1, candidates: 64 };
        let ga = select_gpr2p(&forest, &cfg, &bx, 5).unwrap().gp.unwrap();
        let gb = select_gpr2p(&permuted, &cfg, &bx, 5).unwrap().gp.unwrap();
        prop_assert!((ga.posterior_mean - gb.posterior_mean).abs() < 1e-9);
    }
}
