mod common;

use arbor::decomposition::{
    component_data, enumerate_partitions, essential_tree, light_partition, split_all, w4_certificate,
};
use arbor::metrics::DistanceContext;
use arbor::nets::Mode;
use arbor::partitions::{
    check_crucial, check_partition_tree, check_root_chain, construct_root_chain, fit_to_hypothesis,
    partition_from_roots, replacement_is_net_naive, PartitionTree, RootChain,
};
use arbor::verify::{measure_suite, split_residual};
use arbor::{SparseVector, WeightedTree};
use common::{arb_measure, arb_weighted};
use proptest::prelude::*;

fn build(wt: &WeightedTree, levels: usize) -> (DistanceContext, RootChain, PartitionTree) {
    let (ctx, _) = fit_to_hypothesis(wt, levels).unwrap();
    let chain = construct_root_chain(&ctx, levels, Mode::Exact).unwrap();
    let pt = partition_from_roots(&ctx, &chain);
    (ctx, chain, pt)
}

fn arb_case() -> impl Strategy<Value = (WeightedTree, SparseVector)> {
    arb_weighted(40, 2.0).prop_flat_map(|wt| {
        let n = wt.len();
        (Just(wt), arb_measure(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chains_satisfy_all_four_properties(wt in arb_weighted(40, 2.0)) {
        let (ctx, chain, pt) = build(&wt, 10);
        for r in check_root_chain(&ctx, &chain, 10) {
            prop_assert!(r.passed(), "{:?}", r);
            for tau in chain.added(r.level.max(1)) {
                if r.level >= 1 {
                    prop_assert_eq!(
                        r.replaceable.contains(&tau),
                        replacement_is_net_naive(&ctx, &chain, r.level, tau)
                    );
                }
            }
        }
        prop_assert!(check_partition_tree(&ctx, &chain, &pt, 10).passed());
        for t in check_crucial(&ctx, &chain, &pt, 10) {
            prop_assert!(t.ok, "{:?}", t);
        }
    }

    #[test]
    fn greedy_chains_are_nets(wt in arb_weighted(40, 2.0)) {
        let (ctx, _) = fit_to_hypothesis(&wt, 8).unwrap();
        if let Ok(chain) = construct_root_chain(&ctx, 8, Mode::Greedy) {
            for r in check_root_chain(&ctx, &chain, 8) {
                prop_assert!(r.nested && r.net_ok && r.minimal_ok.is_none());
            }
        }
    }

    #[test]
    fn decomposition_invariants((wt, mu) in arb_case(), n in 1usize..8) {
        prop_assume!(!mu.is_empty());
        let (ctx, _, pt) = build(&wt, 12);
        let suite = measure_suite(&ctx, &pt, std::slice::from_ref(&mu), &[n]).unwrap();
        for c in suite.checks() {
            prop_assert!(c.passed(), "{:?}", c);
        }
        let et = essential_tree(&pt, &mu, n).unwrap();
        let light = light_partition(&ctx, &pt, &et);
        prop_assert!(split_residual(&ctx, &light, &mu) <= 1e-12);
        // W¹…W⁴ have disjoint supports along each branch, so norms add up in ℓ_q^q.
        let parts = split_all(ctx.levels(), &light, &mu);
        let w = ctx.levels().apply_w(&mu);
        for t in 0..wt.len() {
            let nonzero = parts.iter().filter(|p| p[t] != 0.0).count();
            prop_assert!(nonzero <= 1 || (w[t] - parts.iter().map(|p| p[t]).sum::<f64>()).abs() <= 1e-12);
        }
        for d in component_data(&light, &ctx) {
            prop_assert!(d.x_ok && d.gamma_ok && d.level >= 2);
        }
    }

    /// Two measures give the same light partition exactly when they give the
    /// same heavy domains.
    #[test]
    fn light_partitions_determine_heavy_sets(
        wt in arb_weighted(30, 2.0),
        seeds in (any::<u64>(), any::<u64>()),
        n in 1usize..6,
    ) {
        let (ctx, _, pt) = build(&wt, 8);
        let mus = arbor::verify::sample_measures(wt.len(), 2, 4, seeds.0 ^ seeds.1);
        let a = essential_tree(&pt, &mus[0], n).unwrap();
        let b = essential_tree(&pt, &mus[1], n).unwrap();
        let la = light_partition(&ctx, &pt, &a);
        let lb = light_partition(&ctx, &pt, &b);
        let same_lights = la.lights.iter().map(|l| l.domain).collect::<Vec<_>>()
            == lb.lights.iter().map(|l| l.domain).collect::<Vec<_>>();
        prop_assert_eq!(same_lights, a.heavy == b.heavy);
        if a.heavy != b.heavy {
            prop_assert!(w4_certificate(ctx.levels(), &pt, &la, &mus[1], n).is_err());
        }
    }
}

#[test]
fn subtree_counts_agree_and_respect_the_bound() {
    for seed in 0..6 {
        let wt = arbor::instance::generate(&arbor::instance::InstanceSpec::random(25, seed)).unwrap();
        let (_, _, pt) = build(&wt, 4);
        for n in 1..=4 {
            let c = enumerate_partitions(&pt, n).unwrap();
            assert_eq!(c.brute_force, c.dynamic, "seed {seed}, n {n}");
            assert!((c.brute_force as f64) <= c.bound);
        }
    }
}

#[test]
fn too_few_levels_are_reported() {
    let wt = arbor::instance::generate(&arbor::instance::InstanceSpec::random(25, 1)).unwrap();
    let (_, _, pt) = build(&wt, 3);
    let mu = SparseVector::delta(0);
    assert!(matches!(essential_tree(&pt, &mu, 10), Err(arbor::Error::NotEnoughLevels { .. })));
    assert!(matches!(essential_tree(&pt, &SparseVector::new(), 2), Err(arbor::Error::EmptyMeasure)));
    let big = SparseVector::from_pairs([(0, 0.8), (1, 0.8)]);
    assert!(matches!(essential_tree(&pt, &big, 2), Err(arbor::Error::MeasureTooLarge(_))));
}

/// On the corollary tree every new root hangs directly below its domain
/// root, so the crucial inequality is only exercised off that instance.
#[test]
fn crucial_inequality_is_exercised_on_random_trees() {
    let (mut nonzero, mut worst) = (0, 0.0f64);
    for seed in 0..50 {
        let wt = arbor::instance::generate(&arbor::instance::InstanceSpec::random(40, seed)).unwrap();
        let (ctx, chain, pt) = build(&wt, 10);
        for t in check_crucial(&ctx, &chain, &pt, 10) {
            assert!(t.ok, "seed {seed}: {t:?}");
            if t.lhs > 0.0 {
                nonzero += 1;
                worst = worst.max(t.lhs / t.rhs);
            }
        }
    }
    assert!(nonzero > 100 && worst > 0.5, "{nonzero} nonzero triples, worst ratio {worst}");
}
