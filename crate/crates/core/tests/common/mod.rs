#![allow(dead_code)]

use std::sync::Arc;

use arbor::{RootedTree, SparseVector, WeightedTree};
use proptest::collection::vec;
use proptest::prelude::*;

/// Parent of node `i ≥ 1` is `r_i mod i`, so every labelling is reachable.
pub fn tree_from_draws(draws: &[u32]) -> RootedTree {
    let parents: Vec<Option<usize>> =
        (0..draws.len()).map(|i| if i == 0 { None } else { Some(draws[i] as usize % i) }).collect();
    RootedTree::from_parent_indices(&parents).unwrap()
}

pub fn arb_tree(max_len: usize) -> impl Strategy<Value = RootedTree> {
    vec(any::<u32>(), 1..=max_len).prop_map(|d| tree_from_draws(&d))
}

/// Random `α ∈ [0.2, 1)` and `σ` shrinking by a factor in `[0.3, 1]` on some edges.
pub fn arb_weighted(max_len: usize, q: f64) -> impl Strategy<Value = WeightedTree> {
    (1..=max_len).prop_flat_map(move |n| {
        (vec(any::<u32>(), n), vec(0.2..1.0f64, n), vec(prop_oneof![Just(1.0), 0.3..1.0f64], n)).prop_map(
            move |(draws, alpha, shrink)| {
                let tree = tree_from_draws(&draws);
                let mut sigma = vec![1.0; n];
                for &v in tree.preorder() {
                    if let Some(p) = tree.parent(v) {
                        sigma[v] = sigma[p] * shrink[v];
                    }
                }
                WeightedTree::new(Arc::new(tree), alpha, sigma, q).unwrap()
            },
        )
    })
}

pub fn arb_q() -> impl Strategy<Value = f64> {
    prop_oneof![Just(2.0), 1.1..2.0f64]
}

/// A measure on `0..len` with `ℓ₁` norm at most one.
pub fn arb_measure(len: usize) -> impl Strategy<Value = SparseVector> {
    vec((0..len, -1.0..1.0f64), 1..=len.min(8)).prop_map(|pairs| {
        let total: f64 = pairs.iter().map(|p| p.1.abs()).sum();
        let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
        let mut mu = SparseVector::from_pairs(pairs.into_iter().map(|(t, x)| (t, x * scale)));
        while mu.l1_norm() > 1.0 {
            mu = mu.scaled(1.0 - 1e-15);
        }
        mu
    })
}

pub fn lq(v: &[f64], q: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
