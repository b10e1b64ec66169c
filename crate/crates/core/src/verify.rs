//! The invariant suite over one instance, as a machine-readable report.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::{
    component_data, essential_tree, gamma_counts, is_ancestor_closed, is_tree_partition, light_partition, split_all,
    w4_certificate, LightPartition,
};
use crate::entropy::{entropy_lower_all, entropy_upper_all, ColumnOperator, EstimatorConfig};
use crate::error::Result;
use crate::instance::random_measure;
use crate::le_with_slack;
use crate::metrics::DistanceContext;
use crate::nets::{compare_dyadic, verify_covering_relations, Mode};
use crate::partitions::{
    check_crucial, check_partition_tree, check_root_chain, construct_root_chain, fit_to_hypothesis,
    partition_from_roots, PartitionTree,
};
use crate::weights::{lq_norm, SparseVector, WeightedTree};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub checked: u64,
    pub violations: u64,
    /// Reported but not counted against the instance.
    pub informational: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str) -> Self {
        Self { name: name.into(), checked: 0, violations: 0, informational: false, detail: String::new() }
    }

    fn record(&mut self, ok: bool) {
        self.checked += 1;
        if !ok {
            self.violations += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.informational || self.violations == 0
    }
}

/// Worst value of `norm / bound` seen, for details.
#[derive(Default)]
struct Worst(f64);

impl Worst {
    fn see(&mut self, num: f64, den: f64) {
        if den > 0.0 {
            self.0 = self.0.max(num / den);
        }
    }
}

/// Results of the decomposition checks over a set of measures and `n`.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureSuite {
    pub pairs: usize,
    pub lb1: Check,
    pub light_partition: Check,
    pub w4: Check,
    pub split: Check,
    pub components: Check,
    pub gamma_counts: Check,
    pub worst_w4_ratio: f64,
    pub worst_split_residual: f64,
    pub generic_lights: usize,
}

impl MeasureSuite {
    pub fn checks(&self) -> [&Check; 6] {
        [&self.lb1, &self.light_partition, &self.w4, &self.split, &self.components, &self.gamma_counts]
    }
}

/// Splitting residual `‖Wμ − Σ W^i μ‖_q / ‖Wμ‖_q`.
pub fn split_residual(ctx: &DistanceContext, light: &LightPartition, mu: &SparseVector) -> f64 {
    let lp = ctx.levels();
    let w = lp.apply_w(mu);
    let parts = split_all(lp, light, mu);
    let diff: Vec<f64> = (0..w.len()).map(|t| w[t] - parts.iter().map(|p| p[t]).sum::<f64>()).collect();
    let norm = lq_norm(&w, ctx.q());
    if norm == 0.0 {
        lq_norm(&diff, ctx.q())
    } else {
        lq_norm(&diff, ctx.q()) / norm
    }
}

pub const SPLIT_TOLERANCE: f64 = 1e-12;

pub fn measure_suite(
    ctx: &DistanceContext,
    pt: &PartitionTree,
    mus: &[SparseVector],
    ns: &[usize],
) -> Result<MeasureSuite> {
    let lp = ctx.levels();
    let mut lb1 = Check::new("decomposition.essential_tree_counts");
    let mut lpart = Check::new("decomposition.light_partition");
    let mut w4 = Check::new("decomposition.w4_bound");
    let mut split = Check::new("decomposition.splitting");
    let mut comps = Check::new("decomposition.component_bounds");
    let mut gammas = Check::new("decomposition.gamma_counts");
    let (mut w4_worst, mut split_worst) = (Worst::default(), 0.0f64);
    let mut generic = 0;
    for mu in mus {
        for &n in ns {
            let et = essential_tree(pt, mu, n)?;
            lb1.record(et.counting_bounds_hold());
            let light = light_partition(ctx, pt, &et);
            lpart.record(is_tree_partition(pt, &light) && is_ancestor_closed(pt, &et));
            let cert = w4_certificate(lp, pt, &light, mu, n)?;
            w4_worst.see(cert.norm, cert.bound);
            w4.record(cert.pass);
            let res = split_residual(ctx, &light, mu);
            split_worst = split_worst.max(res);
            split.record(res <= SPLIT_TOLERANCE);
            for d in component_data(&light, ctx) {
                comps.record(d.x_ok && d.gamma_ok);
            }
            generic += light.lights.iter().filter(|l| l.generic).count();
            for (_, count, cap) in gamma_counts(&light, ctx, pt.max_level()) {
                gammas.record((count as u128) <= cap);
            }
        }
    }
    w4.detail = format!("worst norm/bound {:.6}", w4_worst.0);
    split.detail = format!("worst relative residual {split_worst:.3e}");
    Ok(MeasureSuite {
        pairs: mus.len() * ns.len(),
        lb1,
        light_partition: lpart,
        w4,
        split,
        components: comps,
        gamma_counts: gammas,
        worst_w4_ratio: w4_worst.0,
        worst_split_residual: split_worst,
        generic_lights: generic,
    })
}

/// Seeded measures in the `ℓ₁` unit ball.
pub fn sample_measures(len: usize, count: usize, max_support: usize, seed: u64) -> Vec<SparseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_measure(len, max_support, &mut rng)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    /// Levels of the root chain; must be at least the largest `n`.
    pub levels: usize,
    /// Levels whose chain properties are checked in full.
    pub check_levels: usize,
    pub measures: usize,
    pub max_support: usize,
    pub n_values: Vec<usize>,
    pub seed: u64,
    /// Node limit for exact covering numbers.
    pub exact_limit: usize,
    /// Entropy bounds are checked for `n = 1..=entropy_n`.
    pub entropy_n: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            levels: 64,
            check_levels: 12,
            measures: 50,
            max_support: 16,
            n_values: vec![4, 16, 64],
            seed: 0,
            exact_limit: 64,
            entropy_n: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub nodes: usize,
    pub q: f64,
    /// Rescaling constant that made the chain hypothesis hold.
    pub c0: f64,
    pub config: VerifyConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Geometric grid `r·2^{-i/2}`, `i = 0..count`, offset off the breakpoints;
/// `r = 1` for a zero radius.
pub fn epsilon_grid(radius: f64, count: usize) -> Vec<f64> {
    let radius = if radius > 0.0 { radius } else { 1.0 };
    (0..count).map(|i| radius * 1.01 * 0.5f64.powf(i as f64 / 2.0)).collect()
}

pub fn verify(wt: &WeightedTree, cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let tree = wt.tree();
    let n = wt.len();
    let q = wt.q();

    let mut c = Check::new("tree.order");
    for v in 0..n {
        if let Some(p) = tree.parent(v) {
            c.record(tree.precedes(p, v) && !tree.precedes(v, p) && tree.depth(v) == tree.depth(p) + 1);
        }
    }
    checks.push(c);

    let mus = sample_measures(n, cfg.measures, cfg.max_support, cfg.seed);
    let kappa = wt.kappa();
    let mut c = Check::new("weights.kappa_bound");
    let mut worst = Worst::default();
    for mu in &mus {
        let lhs = lq_norm(&wt.apply_v(mu), q);
        worst.see(lhs, kappa * mu.l1_norm());
        c.record(le_with_slack(lhs, kappa * mu.l1_norm()));
    }
    c.detail = format!("kappa {kappa:.6}, worst ratio {:.6}", worst.0);
    checks.push(c);

    let ctx = DistanceContext::new(wt);
    let lp = ctx.levels();
    let mut c = Check::new("levels.sigma_hat");
    for v in 0..n {
        let (s, h) = (wt.sigma()[v], lp.sigma_hat()[v]);
        let monotone = tree.parent(v).is_none_or(|p| lp.level(p) <= lp.level(v));
        c.record(h / 2.0 < s && s <= h && monotone);
    }
    checks.push(c);

    let mut c = Check::new("levels.w_support");
    for s in 0..n {
        c.record(lp.column_w(s).iter().all(|&(t, _)| tree.precedes(t, s) && lp.equiv(t, s)));
    }
    checks.push(c);

    let mut le = Check::new("metrics.localized_le_order");
    let mut min_form = Check::new("metrics.min_form");
    for s in 0..n {
        for t in tree.ancestors(s) {
            let di = ctx.localized_distance(t, s);
            le.record(le_with_slack(di, ctx.order_distance_unchecked(t, s)));
            let alt = ctx.localized_distance_min_form(t, s);
            min_form.record((di - alt).abs() <= crate::REL_SLACK * di.max(alt));
        }
    }
    checks.push(le);
    checks.push(min_form);

    let raw = DistanceContext::raw(wt);
    let mut c = Check::new("metrics.root_radius");
    let radius = raw.root_radius();
    c.record(le_with_slack(radius, kappa));
    c.detail = format!("sup_s d(root, s) = {radius:.6}, kappa = {kappa:.6}");
    checks.push(c);

    let mut rel = Check::new("nets.covering_relations");
    let mut sandwich = Check::new("nets.dyadic_sandwich");
    let mut literal = Check::new("nets.dyadic_literal");
    literal.informational = true;
    if n <= cfg.exact_limit {
        let grid = epsilon_grid(ctx.root_radius(), 8);
        for r in verify_covering_relations(&ctx, &grid, cfg.exact_limit)? {
            rel.record(r.holds());
        }
        for &e in &epsilon_grid(raw.root_radius(), 8) {
            let d = compare_dyadic(&ctx, &raw, e, cfg.exact_limit)?;
            sandwich.record(d.sandwich_holds());
            literal.record(d.literal_holds());
        }
        literal.detail = "N(d̂,ε) ≤ N(d,2ε) fails whenever N(d,ε) > N(d,2ε) and σ is dyadic".into();
    } else {
        for c in [&mut rel, &mut sandwich, &mut literal] {
            c.detail = format!("skipped: {n} nodes exceed the exact limit {}", cfg.exact_limit);
        }
    }
    checks.extend([rel, sandwich, literal]);

    let levels = cfg.levels.max(cfg.n_values.iter().copied().max().unwrap_or(0));
    let (ctx, c0) = fit_to_hypothesis(wt, levels)?;
    let chain = construct_root_chain(&ctx, levels, Mode::Exact)?;
    let upto = cfg.check_levels.min(levels);
    let mut c = Check::new("partitions.root_chain");
    for r in check_root_chain(&ctx, &chain, upto) {
        c.record(r.passed());
    }
    checks.push(c);
    let pt = partition_from_roots(&ctx, &chain);
    let mut c = Check::new("partitions.partition_tree");
    let rep = check_partition_tree(&ctx, &chain, &pt, levels);
    c.record(rep.passed());
    c.detail = format!("{} radius violations", rep.radius_violations.len());
    checks.push(c);
    let mut c = Check::new("partitions.crucial_inequality");
    for t in check_crucial(&ctx, &chain, &pt, upto) {
        c.record(t.ok);
    }
    checks.push(c);

    let suite = measure_suite(&ctx, &pt, &mus, &cfg.n_values)?;
    checks.extend(suite.checks().into_iter().cloned());

    let op = ColumnOperator::from_w(ctx.levels());
    let ecfg = EstimatorConfig { seed: cfg.seed, ..EstimatorConfig::default() };
    let ups = entropy_upper_all(&op, cfg.entropy_n, &ecfg);
    let lows = entropy_lower_all(&op, cfg.entropy_n, &ecfg);
    let mut c = Check::new("entropy.bounds");
    for i in 0..cfg.entropy_n {
        let monotone = i == 0 || (ups[i].value <= ups[i - 1].value && lows[i].value <= lows[i - 1].value);
        c.record(lows[i].value <= ups[i].value && monotone);
    }
    checks.push(c);

    let passed = checks.iter().all(Check::passed);
    Ok(VerifyReport { nodes: n, q, c0, config: cfg.clone(), checks, passed })
}
