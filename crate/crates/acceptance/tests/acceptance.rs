//! One line per acceptance criterion. Criteria that fail are reported and
//! make the target exit nonzero after all of them have run.

use std::time::{Duration, Instant};

use arbor::decomposition::enumerate_partitions;
use arbor::entropy::{entropy_upper_all, estimate, loglog_slope, ColumnOperator, EstimatorConfig};
use arbor::instance::{generate, InstanceSpec};
use arbor::metrics::DistanceContext;
use arbor::nets::{compare_dyadic, verify_covering_relations, Mode};
use arbor::partitions::{
    check_crucial, check_partition_tree, check_root_chain, construct_root_chain, partition_from_roots, PartitionTree,
    RootChain,
};
use arbor::verify::{epsilon_grid, measure_suite, sample_measures, MeasureSuite};
use rand::{Rng, SeedableRng};

const DEPTH: usize = 14;
const CHECK_LEVELS: usize = 12;
const CHAIN_LEVELS: usize = 64;
const MEASURES: usize = 200;
const MEASURE_SUPPORT: usize = 32;
const N_VALUES: [usize; 3] = [4, 16, 64];
const SLOPE_BAND: (f64, f64) = (-0.75, -0.35);
const SPREAD_LIMIT: f64 = 6.0;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

struct Corollary {
    ctx: DistanceContext,
    chain: RootChain,
    pt: PartitionTree,
    chain_time: Duration,
}

fn corollary() -> Corollary {
    let wt = generate(&InstanceSpec::corollary(DEPTH)).unwrap();
    let ctx = DistanceContext::new(&wt);
    let start = Instant::now();
    let chain =
        construct_root_chain(&ctx, CHAIN_LEVELS, Mode::Exact).expect("the corollary instance meets the hypothesis");
    let pt = partition_from_roots(&ctx, &chain);
    Corollary { ctx, chain, pt, chain_time: start.elapsed() }
}

fn criterion_1(c: &Corollary) -> (bool, String) {
    let start = Instant::now();
    let reports = check_root_chain(&c.ctx, &c.chain, CHECK_LEVELS);
    let bad: Vec<usize> = reports.iter().filter(|r| !r.passed()).map(|r| r.level).collect();
    let part = check_partition_tree(&c.ctx, &c.chain, &c.pt, CHECK_LEVELS);
    let elapsed = c.chain_time + start.elapsed();
    let sizes: Vec<usize> = c.chain.levels[..=CHECK_LEVELS].iter().map(Vec::len).collect();
    let pass = bad.is_empty() && part.passed() && elapsed < Duration::from_secs(600);
    (
        pass,
        format!(
            "{} nodes, #R_m = {sizes:?}, failing levels {bad:?}, partition ok {}, {elapsed:.2?}",
            c.ctx.len(),
            part.passed()
        ),
    )
}

fn criterion_2(c: &Corollary) -> (bool, String) {
    let triples = check_crucial(&c.ctx, &c.chain, &c.pt, CHECK_LEVELS);
    let bad = triples.iter().filter(|t| !t.ok).count();
    let worst = triples.iter().map(|t| t.lhs / t.rhs).fold(0.0, f64::max);
    let adjacent = triples.iter().filter(|t| t.lhs == 0.0).count();
    (
        bad == 0 && !triples.is_empty(),
        format!("{} triples ({adjacent} with τ⁻ = r), {bad} violations, worst lhs/rhs {worst:.4}", triples.len()),
    )
}

fn criterion_3(s: &MeasureSuite) -> (bool, String) {
    (
        s.w4.violations == 0,
        format!("{} (μ, n) pairs, {} violations, worst ‖W⁴μ‖/bound {:.4}", s.pairs, s.w4.violations, s.worst_w4_ratio),
    )
}

fn criterion_4(s: &MeasureSuite) -> (bool, String) {
    (s.lb1.violations == 0, format!("{} (μ, n) pairs, {} violations", s.pairs, s.lb1.violations))
}

fn criterion_5(s: &MeasureSuite) -> (bool, String) {
    (
        s.split.violations == 0,
        format!("{} (μ, n) pairs, worst relative residual {:.2e}", s.pairs, s.worst_split_residual),
    )
}

fn criterion_6() -> (bool, String) {
    let (mut checks, mut bad, mut literal, mut literal_bad, mut sandwich_bad) = (0, 0, 0, 0, 0);
    let mut example = None;
    for seed in 0..50u64 {
        let len = 8 + (seed as usize * 7) % 25;
        let wt = generate(&InstanceSpec::random(len, seed)).unwrap();
        let raw = DistanceContext::raw(&wt);
        let reduced = DistanceContext::new(&wt);
        let grid = epsilon_grid(raw.root_radius(), 8);
        for r in verify_covering_relations(&raw, &grid, 64).unwrap() {
            checks += 2;
            bad += usize::from(!r.lower_holds) + usize::from(!r.upper_holds);
        }
        for &e in &grid {
            let d = compare_dyadic(&reduced, &raw, e, 64).unwrap();
            literal += 1;
            if !d.literal_holds() {
                literal_bad += 1;
                example.get_or_insert((seed, len, d.epsilon, d.reduced, d.original_at_2eps));
            }
            sandwich_bad += usize::from(!d.sandwich_holds());
        }
    }
    let ex = example.map_or(String::new(), |(seed, len, e, a, b)| {
        format!("; e.g. seed {seed} ({len} nodes), ε = {e:.4}: N(d̂,ε) = {a} > N(d,2ε) = {b}")
    });
    (
        bad == 0 && literal_bad == 0,
        format!(
            "N ≤ Ñ and Ñ(2ε) ≤ N: {checks} checks, {bad} violations; N(d̂,ε) ≤ N(d,2ε): {literal} checks, {literal_bad} violations{ex}; \
             N(d,ε) ≤ N(d̂,ε) and N(d̂,2ε) ≤ N(d,ε): {sandwich_bad} violations"
        ),
    )
}

fn criterion_7(s: &MeasureSuite) -> (bool, String) {
    let pass = s.components.violations == 0 && s.gamma_counts.violations == 0 && s.components.checked > 0;
    (
        pass,
        format!(
            "{} component checks ({} generic lights), {} violations; {} counting checks, {} violations",
            s.components.checked,
            s.generic_lights,
            s.components.violations,
            s.gamma_counts.checked,
            s.gamma_counts.violations
        ),
    )
}

fn criterion_8(c: &Corollary) -> (bool, String) {
    let ns = [4usize, 8, 16, 32, 64];
    let start = Instant::now();
    let op = ColumnOperator::from_w(c.ctx.levels());
    let ups = entropy_upper_all(&op, 64, &EstimatorConfig::default());
    let u: Vec<f64> = ns.iter().map(|&n| ups[n - 1].value).collect();
    let slope = loglog_slope(&ns.iter().zip(&u).map(|(&n, &v)| (n as f64, v)).collect::<Vec<_>>()).unwrap();
    let scaled: Vec<f64> = ns.iter().zip(&u).map(|(&n, &v)| (n as f64).sqrt() * v).collect();
    let spread = scaled.iter().copied().fold(0.0, f64::max) / scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let pass =
        (SLOPE_BAND.0..=SLOPE_BAND.1).contains(&slope) && spread <= SPREAD_LIMIT && elapsed < Duration::from_secs(1800);
    let shown: Vec<String> = u.iter().map(|v| format!("{v:.4}")).collect();
    (
        pass,
        format!(
            "u_n = [{}], slope {slope:.4} (band [{}, {}]), spread {spread:.3} (≤ {SPREAD_LIMIT}), {elapsed:.2?}",
            shown.join(", "),
            SLOPE_BAND.0,
            SLOPE_BAND.1
        ),
    )
}

fn criterion_9() -> (bool, String) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let (mut worst_hi, mut worst_lo): (f64, f64) = (1.0, 1.0);
    let mut bad = 0;
    for _ in 0..20 {
        let dim = rng.gen_range(1..8);
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let op = ColumnOperator::from_dense(&[v], 2.0, "v").unwrap();
        let norm = op.max_norm();
        for e in estimate(&op, &(1..=10).collect::<Vec<_>>(), &EstimatorConfig::default()).unwrap() {
            let exact = norm * 0.5f64.powi(e.n as i32 - 1);
            let (hi, lo) = (e.upper / exact, e.lower / exact);
            worst_hi = worst_hi.max(hi);
            worst_lo = worst_lo.min(lo);
            bad += usize::from(!((1.0..=1.05).contains(&hi) && (0.95..=1.0).contains(&lo)));
        }
    }
    (
        bad == 0,
        format!("200 estimates, {bad} outside tolerance, upper/exact ≤ {worst_hi:.6}, lower/exact ≥ {worst_lo:.6}"),
    )
}

fn criterion_10() -> (bool, String) {
    let mut lines = Vec::new();
    let mut pass = true;
    let specs = std::iter::once(InstanceSpec::corollary(6)).chain((0..10).map(|seed| InstanceSpec::random(60, seed)));
    let mut largest = 0;
    for spec in specs {
        let wt = generate(&spec).unwrap();
        let (ctx, _) = arbor::partitions::fit_to_hypothesis(&wt, 2).unwrap();
        let chain = construct_root_chain(&ctx, 2, Mode::Exact).unwrap();
        let pt = partition_from_roots(&ctx, &chain);
        largest = largest.max(pt.domains.len());
        let counts: Vec<String> = (1..=3)
            .map(|n| {
                let c = enumerate_partitions(&pt, n).unwrap();
                pass &= c.brute_force as f64 <= c.bound && c.brute_force == c.dynamic;
                c.brute_force.to_string()
            })
            .collect();
        lines.push(counts.join("/"));
    }
    let bounds: Vec<String> = (1..=3).map(|n| format!("{:.0}", (8.0 * std::f64::consts::E).powi(n))).collect();
    (
        pass,
        format!(
            "11 partition trees (≤ {largest} domains), counts n=1/2/3: {} against ⌊(8e)^n⌋ = {}",
            lines.join(", "),
            bounds.join("/")
        ),
    )
}

fn main() {
    let mut outcomes = Vec::new();
    let mut run = |id: u32, title: &'static str, f: &mut dyn FnMut() -> (bool, String)| {
        let start = Instant::now();
        let (pass, detail) = f();
        let o = Outcome { id, title, pass, detail, elapsed: start.elapsed() };
        println!(
            "criterion {:>2} [{}] {}: {} ({:.2?})",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            o.title,
            o.detail,
            o.elapsed
        );
        outcomes.push(o);
    };
    let c = corollary();
    let start = Instant::now();
    let mus = sample_measures(c.ctx.len(), MEASURES, MEASURE_SUPPORT, 2024);
    let suite = measure_suite(&c.ctx, &c.pt, &mus, &N_VALUES).unwrap();
    println!("shared suite: {MEASURES} measures × n ∈ {N_VALUES:?} on {} nodes ({:.2?})", c.ctx.len(), start.elapsed());
    run(1, "root chain invariants", &mut || criterion_1(&c));
    run(2, "crucial inequality", &mut || criterion_2(&c));
    run(3, "W⁴ certificate", &mut || criterion_3(&suite));
    run(4, "essential tree counts", &mut || criterion_4(&suite));
    run(5, "operator splitting", &mut || criterion_5(&suite));
    run(6, "covering oracles", &mut criterion_6);
    run(7, "component bounds", &mut || criterion_7(&suite));
    run(8, "entropy decay", &mut || criterion_8(&c));
    run(9, "rank-one oracle", &mut criterion_9);
    run(10, "subtree counts", &mut criterion_10);
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    println!("{} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        eprintln!("failing criteria: {failed:?}");
        std::process::exit(1);
    }
}
