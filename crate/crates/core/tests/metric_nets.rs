mod common;

use std::sync::Arc;

use arbor::metrics::{DistanceContext, Metric};
use arbor::nets::{
    compare_dyadic, covering_number, is_order_net, minimal_augmentation, order_net_number, order_net_set_cover,
    verify_covering_relations, Mode,
};
use arbor::{RootedTree, WeightedTree};
use common::{arb_q, arb_weighted, close};
use proptest::prelude::*;

/// `d(t, s)` for `t ⪯ s` straight from the definition: the largest
/// `(Σ_{(t,v]} α^q)^{1/q} σ̂(v)` over `v ∈ (t, s]`.
fn d_oracle(ctx: &DistanceContext, t: usize, s: usize) -> f64 {
    let tree = ctx.tree();
    let path: Vec<usize> = {
        let mut p: Vec<usize> = tree.ancestors(s).take_while(|&v| v != t).collect();
        p.reverse();
        p
    };
    let mut sum = 0.0;
    let mut best: f64 = 0.0;
    for v in path {
        sum += ctx.alpha_q(v);
        best = best.max(sum.powf(1.0 / ctx.q()) * ctx.sigma()[v]);
    }
    best
}

/// `d_𝕀(t, s)`: the α-sum runs over `v ∈ (t, s]` with `v ≡ s` only.
fn d_local_oracle(ctx: &DistanceContext, t: usize, s: usize) -> f64 {
    let tree = ctx.tree();
    let lp = ctx.levels();
    let mut sum = 0.0;
    for v in tree.ancestors(s).take_while(|&v| v != t) {
        if lp.equiv(v, s) {
            sum += ctx.alpha_q(v);
        }
    }
    sum.powf(1.0 / ctx.q()) * lp.sigma_hat()[s]
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..1 << n).map(move |m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
}

proptest! {
    #[test]
    fn distances_match_their_definitions(wt in arb_q().prop_flat_map(|q| arb_weighted(20, q))) {
        let ctx = DistanceContext::new(&wt);
        let tree = ctx.tree();
        for s in 0..wt.len() {
            for t in tree.ancestors(s) {
                let d = ctx.order_distance(t, s).unwrap();
                prop_assert!(close(d, d_oracle(&ctx, t, s), 1e-12) || d == d_oracle(&ctx, t, s));
                let di = ctx.localized_distance(t, s);
                let oracle = d_local_oracle(&ctx, t, s);
                prop_assert!((di - oracle).abs() <= 1e-12 * oracle.max(1e-300));
                prop_assert!(di <= d * (1.0 + 1e-12));
                let alt = ctx.localized_distance_min_form(t, s);
                prop_assert!((di - alt).abs() <= 1e-12 * di.max(alt).max(1e-300));
            }
        }
    }

    #[test]
    fn full_distance_is_a_metric(wt in arb_weighted(24, 2.0)) {
        let ctx = DistanceContext::new(&wt);
        let m = ctx.distance_matrix();
        let n = wt.len();
        for a in 0..n {
            prop_assert_eq!(m[a][a], 0.0);
            for b in 0..n {
                prop_assert_eq!(m[a][b], m[b][a]);
                if a != b {
                    prop_assert!(m[a][b] > 0.0);
                }
                for c in 0..n {
                    prop_assert!(m[a][c] <= (m[a][b] + m[b][c]) * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn distances_are_homogeneous(wt in arb_weighted(16, 2.0), c in 0.1..10.0f64, j in -4i32..4) {
        let ctx = DistanceContext::new(&wt);
        let alpha: Vec<f64> = wt.alpha().iter().map(|a| a * c).collect();
        let sigma: Vec<f64> = wt.sigma().iter().map(|s| s * 2f64.powi(j)).collect();
        let scaled = WeightedTree::new(wt.shared_tree(), alpha, sigma, 2.0).unwrap();
        let sctx = DistanceContext::new(&scaled);
        let f = c * 2f64.powi(j);
        for a in 0..wt.len() {
            for b in 0..wt.len() {
                prop_assert!(close(sctx.full_distance(a, b), f * ctx.full_distance(a, b), 1e-12));
                let (x, y) = (sctx.localized_distance(a, b), ctx.localized_distance(a, b));
                prop_assert!(x == y || close(x, f * y, 1e-12));
            }
        }
    }

    #[test]
    fn covering_numbers_are_monotone(wt in arb_weighted(20, 2.0), e in 0.05..2.0f64) {
        let ctx = DistanceContext::new(&wt);
        let exact = covering_number(&ctx, e, Mode::Exact, 64).unwrap();
        let larger = covering_number(&ctx, 1.5 * e, Mode::Exact, 64).unwrap();
        prop_assert!(larger.value <= exact.value);
        let greedy = covering_number(&ctx, e, Mode::Greedy, 64).unwrap();
        prop_assert!(greedy.value >= exact.value);
        for metric in [Metric::D, Metric::Localized] {
            let a = order_net_number(&ctx, e, metric, Mode::Exact).unwrap();
            let b = order_net_number(&ctx, 1.5 * e, metric, Mode::Exact).unwrap();
            prop_assert!(b.value <= a.value);
        }
    }

    #[test]
    fn sweep_matches_the_set_cover_oracle(wt in arb_weighted(24, 2.0), e in 0.05..2.0f64) {
        let ctx = DistanceContext::new(&wt);
        for metric in [Metric::D, Metric::Localized] {
            let sweep = order_net_number(&ctx, e, metric, Mode::Exact).unwrap();
            let oracle = order_net_set_cover(&ctx, e, metric).unwrap();
            prop_assert_eq!(sweep.value, oracle.value);
            prop_assert!(is_order_net(&ctx, metric, e, &sweep.centers));
            prop_assert!(is_order_net(&ctx, metric, e, &oracle.centers));
            let greedy = order_net_number(&ctx, e, metric, Mode::Greedy).unwrap();
            prop_assert!(greedy.value >= sweep.value);
            prop_assert!(is_order_net(&ctx, metric, e, &greedy.centers));
        }
    }

    /// Among all augmentations of the fixed root set with the minimum number
    /// of new centers, the sweep has the least total depth.
    #[test]
    fn augmentation_is_minimal_by_brute_force(wt in arb_weighted(11, 2.0), e in 0.1..1.5f64) {
        let ctx = DistanceContext::new(&wt);
        let tree = ctx.tree();
        let root = vec![tree.root()];
        let add = minimal_augmentation(&ctx, Metric::Localized, e, &root);
        let depth = |s: &[usize]| s.iter().map(|&v| tree.depth(v)).sum::<usize>();
        let mut best: Option<(usize, usize)> = None;
        for extra in subsets(wt.len()) {
            let all: Vec<usize> = root.iter().copied().chain(extra.iter().copied()).collect();
            if is_order_net(&ctx, Metric::Localized, e, &all) {
                let key = (extra.len(), depth(&extra));
                best = Some(best.map_or(key, |b| b.min(key)));
            }
        }
        let best = best.unwrap();
        let mut with_root = add.clone();
        with_root.push(tree.root());
        prop_assert!(is_order_net(&ctx, Metric::Localized, e, &with_root));
        let extra: Vec<usize> = add.iter().copied().filter(|&v| v != tree.root()).collect();
        prop_assert_eq!((extra.len(), depth(&extra)), best);
    }

    #[test]
    fn covering_relations_hold(wt in arb_weighted(24, 2.0)) {
        let ctx = DistanceContext::raw(&wt);
        let r = ctx.root_radius().max(0.1);
        let grid: Vec<f64> = (0..6).map(|i| r * 1.01 * 0.6f64.powi(i)).collect();
        for c in verify_covering_relations(&ctx, &grid, 64).unwrap() {
            prop_assert!(c.holds(), "{:?}", c);
        }
    }

    #[test]
    fn dyadic_sandwich_holds(wt in arb_weighted(20, 2.0), e in 0.05..2.0f64) {
        let c = compare_dyadic(&DistanceContext::new(&wt), &DistanceContext::raw(&wt), e, 64).unwrap();
        prop_assert!(c.sandwich_holds(), "{:?}", c);
    }

    #[test]
    fn root_radius_is_at_most_kappa(wt in arb_q().prop_flat_map(|q| arb_weighted(30, q))) {
        let ctx = DistanceContext::raw(&wt);
        prop_assert!(ctx.root_radius() <= wt.kappa() * (1.0 + 1e-12));
        // every ε above the radius is covered by the root alone
        let net = order_net_number(&ctx, ctx.root_radius() * 1.001 + 1e-300, Metric::D, Mode::Exact).unwrap();
        prop_assert_eq!(net.value, 1);
    }
}

#[test]
fn min_form_needs_the_parent_of_lambda() {
    // Levels (0, 1, 1) along a chain: λ(2) = 1, whose own α-term counts.
    let tree = Arc::new(RootedTree::from_parent_indices(&[None, Some(0), Some(1)]).unwrap());
    let wt = WeightedTree::new(tree, vec![1.0, 1.0, 1.0], vec![1.0, 0.5, 0.5], 2.0).unwrap();
    let ctx = DistanceContext::new(&wt);
    let di = ctx.localized_distance(0, 2);
    assert!(close(di, 2f64.sqrt() * 0.5, 1e-15));
    assert_eq!(ctx.localized_distance_min_form(0, 2), di);
    // the printed form min(d(λ(s), s), d(t, s)) would give d(1, 2) = 0.5
    assert!(close(ctx.order_distance(1, 2).unwrap(), 0.5, 1e-15));
}

#[test]
fn exact_covering_respects_the_size_limit() {
    let parents: Vec<Option<usize>> = (0..70).map(|i: usize| i.checked_sub(1)).collect();
    let tree = Arc::new(RootedTree::from_parent_indices(&parents).unwrap());
    let wt = WeightedTree::new(tree, vec![1.0; 70], vec![1.0; 70], 2.0).unwrap();
    let ctx = DistanceContext::new(&wt);
    assert!(matches!(covering_number(&ctx, 0.5, Mode::Exact, 64), Err(arbor::Error::SizeLimit { .. })));
    assert!(matches!(covering_number(&ctx, 0.5, Mode::Exact, 10), Err(arbor::Error::SizeLimit { .. })));
    assert!(covering_number(&ctx, 0.5, Mode::Greedy, 64).is_ok());
    assert!(covering_number(&ctx, -1.0, Mode::Greedy, 64).is_err());
}
