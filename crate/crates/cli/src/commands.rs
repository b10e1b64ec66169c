use std::path::PathBuf;
use std::str::FromStr;

use arbor::decomposition::{
    component_data, essential_tree, gamma_counts, is_ancestor_closed, is_tree_partition, light_partition,
    w4_certificate, ComponentDatum, LightPartition, W4Certificate,
};
use arbor::entropy::{estimate, loglog_slope, pipeline_bounds, ColumnOperator, EstimatorConfig, PipelineRow};
use arbor::io::{format_tree, format_weights, parse_measure};
use arbor::metrics::{DistanceContext, Metric};
use arbor::nets::{covering_number, order_net_number, Mode};
use arbor::partitions::{
    check_crucial, check_partition_tree, check_root_chain, construct_root_chain, fit_to_hypothesis,
    partition_from_roots, PartitionTree, RootChain,
};
use arbor::verify::{epsilon_grid, sample_measures, split_residual, VerifyConfig, VerifyReport, SPLIT_TOLERANCE};
use arbor::{LevelPartition, NodeId, RootedTree, SparseVector, WeightedTree};
use clap::{ArgAction, Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::instance::{read, InstanceArgs};
use crate::output::{write_text, Target};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Exact,
    Greedy,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exact => Mode::Exact,
            ModeArg::Greedy => Mode::Greedy,
        }
    }
}

fn labels(tree: &RootedTree, nodes: &[NodeId]) -> Vec<u64> {
    nodes.iter().map(|&v| tree.label(v)).collect()
}

fn joined(tree: &RootedTree, nodes: &[NodeId]) -> String {
    nodes.iter().map(|&v| tree.label(v).to_string()).collect::<Vec<_>>().join(" ")
}

/// The exact-mode chain on the instance rescaled to satisfy the covering
/// hypothesis, or the chain on the instance as given.
fn chain_for(wt: &WeightedTree, levels: usize, mode: Mode, fit: bool) -> Result<(DistanceContext, f64, RootChain)> {
    let (ctx, c0) = if fit { fit_to_hypothesis(wt, levels)? } else { (DistanceContext::new(wt), 1.0) };
    let chain = construct_root_chain(&ctx, levels, mode)?;
    Ok((ctx, c0, chain))
}

// ---------------------------------------------------------------- gen-tree

#[derive(Args, Debug)]
pub struct GenTreeArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Weight file to write; defaults to $ARBOR_OUTPUT_DIR/weights.txt
    #[arg(long, value_name = "FILE")]
    pub weights_out: Option<PathBuf>,
}

pub fn gen_tree(a: &GenTreeArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    let mut w = out.open("tree.txt")?;
    w.write_all(format_tree(wt.tree()).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(e.to_string()))?;
    if let Some(p) = a.weights_out.clone().or_else(|| out.side_path("weights.txt")) {
        write_text(&p, &format_weights(&wt))?;
    }
    Ok(())
}

// ---------------------------------------------------------------- dist

#[derive(Args, Debug)]
pub struct DistArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Refuse instances with more nodes (the table has n² rows)
    #[arg(long, default_value_t = 512)]
    pub max_nodes: usize,
}

#[derive(Serialize)]
struct DistRow {
    t: u64,
    s: u64,
    /// `t ⪯ s`
    ancestor: bool,
    d: f64,
    d_hat: f64,
    /// Only for `t ⪯ s`.
    d_localized: Option<f64>,
}

pub fn dist(a: &DistArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    if wt.len() > a.max_nodes {
        return Err(arbor::Error::SizeLimit { size: wt.len(), limit: a.max_nodes }.into());
    }
    let raw = DistanceContext::raw(&wt);
    let hat = DistanceContext::new(&wt);
    let tree = wt.tree();
    let mut rows = Vec::with_capacity(wt.len() * wt.len());
    for t in 0..wt.len() {
        for s in 0..wt.len() {
            let anc = tree.precedes(t, s);
            rows.push(DistRow {
                t: tree.label(t),
                s: tree.label(s),
                ancestor: anc,
                d: raw.full_distance(t, s),
                d_hat: hat.full_distance(t, s),
                d_localized: anc.then(|| hat.localized_distance(t, s)),
            });
        }
    }
    out.csv("dist.csv", &rows)
}

// ---------------------------------------------------------------- nets

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    /// the branch metric d (covering and order-net numbers)
    D,
    /// the localized distance d_𝕀 (order-net numbers)
    #[value(name = "dI", alias = "di")]
    Di,
}

#[derive(Args, Debug)]
pub struct NetsArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// A single radius
    #[arg(long, conflicts_with = "grid", allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Comma-separated radii; default is a geometric grid below the root radius
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', num_args = 1..)]
    pub grid: Vec<f64>,
    /// Points of the default grid
    #[arg(long, default_value_t = 8)]
    pub grid_points: usize,
    #[arg(long, value_enum, default_value = "d")]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Node limit for exact covering numbers
    #[arg(long, default_value_t = 64)]
    pub exact_limit: usize,
}

#[derive(Serialize)]
struct NetRow {
    epsilon: f64,
    quantity: &'static str,
    value: usize,
    exact: bool,
    centers: String,
}

pub fn nets(a: &NetsArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    let ctx = DistanceContext::raw(&wt);
    let grid = match (a.eps, a.grid.is_empty()) {
        (Some(e), _) => vec![e],
        (None, false) => a.grid.clone(),
        (None, true) => epsilon_grid(ctx.root_radius(), a.grid_points),
    };
    let mode = Mode::from(a.mode);
    let tree = wt.tree();
    let mut rows = Vec::new();
    for &eps in &grid {
        match a.metric {
            MetricArg::D => {
                let c = covering_number(&ctx, eps, mode, a.exact_limit)?;
                rows.push(NetRow {
                    epsilon: eps,
                    quantity: "covering",
                    value: c.value,
                    exact: c.exact,
                    centers: joined(tree, &c.centers),
                });
                let o = order_net_number(&ctx, eps, Metric::D, mode)?;
                rows.push(NetRow {
                    epsilon: eps,
                    quantity: "order_net",
                    value: o.value,
                    exact: o.exact,
                    centers: joined(tree, &o.centers),
                });
            }
            MetricArg::Di => {
                let o = order_net_number(&ctx, eps, Metric::Localized, mode)?;
                rows.push(NetRow {
                    epsilon: eps,
                    quantity: "order_net_localized",
                    value: o.value,
                    exact: o.exact,
                    centers: joined(tree, &o.centers),
                });
            }
        }
    }
    out.csv("nets.csv", &rows)
}

// ---------------------------------------------------------------- partitions

#[derive(Args, Debug)]
pub struct PartitionsArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Levels M of the root chain
    #[arg(long, default_value_t = 12)]
    pub levels: usize,
    #[arg(long, value_enum, default_value = "exact")]
    pub mode: ModeArg,
    /// Use the weights as given instead of rescaling α until the chain exists
    #[arg(long)]
    pub no_fit: bool,
}

#[derive(Serialize)]
struct DomainOut {
    id: usize,
    root: u64,
    parent: Option<usize>,
    members: Vec<u64>,
}

#[derive(Serialize)]
struct LevelOut {
    level: usize,
    epsilon: Option<f64>,
    roots: Vec<u64>,
    added: Vec<u64>,
    domains: Vec<DomainOut>,
}

#[derive(Serialize)]
struct ChainCheckOut {
    level: usize,
    size: usize,
    nested: bool,
    size_ok: bool,
    net_ok: bool,
    uncovered: Option<u64>,
    minimal_ok: Option<bool>,
    replaceable: Vec<u64>,
}

#[derive(Serialize)]
struct PartitionCheckOut {
    partitions: bool,
    refines: bool,
    radius_ok: bool,
    radius_violations: usize,
    counts_ok: bool,
}

#[derive(Serialize)]
struct CrucialOut {
    triples: usize,
    nonzero: usize,
    violations: usize,
    worst_ratio: f64,
}

#[derive(Serialize)]
struct PartitionsOut {
    nodes: usize,
    q: f64,
    c0: f64,
    mode: Mode,
    levels: Vec<LevelOut>,
    chain_checks: Vec<ChainCheckOut>,
    partition_check: PartitionCheckOut,
    crucial: CrucialOut,
    passed: bool,
}

fn level_out(tree: &RootedTree, chain: &RootChain, pt: &PartitionTree, m: usize) -> LevelOut {
    LevelOut {
        level: m,
        epsilon: (m > 0).then(|| chain.epsilon(m)),
        roots: labels(tree, &chain.levels[m]),
        added: if m > 0 { labels(tree, &chain.added(m)) } else { labels(tree, &chain.levels[0]) },
        domains: pt.by_level[m]
            .iter()
            .map(|&id| {
                let d = pt.domain(id);
                DomainOut { id, root: tree.label(d.root), parent: d.parent, members: labels(tree, &d.members) }
            })
            .collect(),
    }
}

pub fn partitions(a: &PartitionsArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    let (ctx, c0, chain) = chain_for(&wt, a.levels, a.mode.into(), !a.no_fit)?;
    let pt = partition_from_roots(&ctx, &chain);
    let tree = ctx.tree();
    let reports = check_root_chain(&ctx, &chain, a.levels);
    let pr = check_partition_tree(&ctx, &chain, &pt, a.levels);
    let triples = check_crucial(&ctx, &chain, &pt, a.levels);
    let crucial = CrucialOut {
        triples: triples.len(),
        nonzero: triples.iter().filter(|t| t.lhs > 0.0).count(),
        violations: triples.iter().filter(|t| !t.ok).count(),
        worst_ratio: triples.iter().filter(|t| t.rhs > 0.0).map(|t| t.lhs / t.rhs).fold(0.0, f64::max),
    };
    let passed = reports.iter().all(|r| r.passed()) && pr.passed() && crucial.violations == 0;
    let doc = PartitionsOut {
        nodes: ctx.len(),
        q: ctx.q(),
        c0,
        mode: chain.mode,
        levels: (0..=chain.max_level()).map(|m| level_out(tree, &chain, &pt, m)).collect(),
        chain_checks: reports
            .iter()
            .map(|r| ChainCheckOut {
                level: r.level,
                size: r.size,
                nested: r.nested,
                size_ok: r.size_ok,
                net_ok: r.net_ok,
                uncovered: r.uncovered.map(|v| tree.label(v)),
                minimal_ok: r.minimal_ok,
                replaceable: labels(tree, &r.replaceable),
            })
            .collect(),
        partition_check: PartitionCheckOut {
            partitions: pr.partitions,
            refines: pr.refines,
            radius_ok: pr.radius_ok,
            radius_violations: pr.radius_violations.len(),
            counts_ok: pr.counts_ok,
        },
        crucial,
        passed,
    };
    out.json("partitions.json", &doc)
}

// ---------------------------------------------------------------- decompose

#[derive(Args, Debug)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Measure file (`<id> <value>` per line) or `random:<seed>`
    #[arg(long, default_value = "random:0")]
    pub mu: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Support size limit of random measures
    #[arg(long, default_value_t = 16)]
    pub support: usize,
    /// Levels of the root chain; defaults to max(n, 12)
    #[arg(long)]
    pub levels: Option<usize>,
    /// Use the weights as given instead of rescaling α until the chain exists
    #[arg(long)]
    pub no_fit: bool,
}

#[derive(Serialize)]
struct HeavyOut {
    domain: usize,
    level: usize,
    root: u64,
}

#[derive(Serialize)]
struct LightOut {
    domain: usize,
    level: usize,
    root: u64,
    root_parent: Option<u64>,
    parent_root: u64,
    generic: bool,
    size: usize,
}

#[derive(Serialize)]
struct GammaOut {
    m: usize,
    count: usize,
    cap: u128,
}

#[derive(Serialize)]
struct DecomposeOut {
    n: usize,
    c0: f64,
    mu_l1: f64,
    mu_support: usize,
    heavy: Vec<HeavyOut>,
    terminal: Vec<usize>,
    terminal_level_sum: usize,
    counting_bounds_hold: bool,
    ancestor_closed: bool,
    is_partition: bool,
    lights: Vec<LightOut>,
    w4: W4Certificate,
    split_residual: f64,
    split_ok: bool,
    components: Vec<ComponentDatum>,
    gamma_counts: Vec<GammaOut>,
    passed: bool,
}

fn load_measure(spec: &str, tree: &RootedTree, support: usize) -> Result<SparseVector> {
    match spec.strip_prefix("random:") {
        Some(seed) => {
            let seed: u64 = seed.parse().map_err(|_| CliError::Usage(format!("bad measure seed `{seed}`")))?;
            Ok(sample_measures(tree.len(), 1, support, seed).remove(0))
        }
        None => Ok(parse_measure(&read(&PathBuf::from(spec))?, tree)?),
    }
}

pub fn decompose(a: &DecomposeArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    let mu = load_measure(&a.mu, wt.tree(), a.support)?;
    let levels = a.levels.unwrap_or(a.n.max(12));
    let (ctx, c0, chain) = chain_for(&wt, levels, Mode::Exact, !a.no_fit)?;
    let pt = partition_from_roots(&ctx, &chain);
    let tree = ctx.tree();
    let et = essential_tree(&pt, &mu, a.n)?;
    let light = light_partition(&ctx, &pt, &et);
    let w4 = w4_certificate(ctx.levels(), &pt, &light, &mu, a.n)?;
    let residual = split_residual(&ctx, &light, &mu);
    let components = component_data(&light, &ctx);
    let gammas: Vec<GammaOut> = gamma_counts(&light, &ctx, pt.max_level())
        .into_iter()
        .map(|(m, count, cap)| GammaOut { m, count, cap })
        .collect();
    let doc = DecomposeOut {
        n: a.n,
        c0,
        mu_l1: mu.l1_norm(),
        mu_support: mu.len(),
        heavy: et
            .heavy
            .iter()
            .map(|&id| {
                let d = pt.domain(id);
                HeavyOut { domain: id, level: d.level, root: tree.label(d.root) }
            })
            .collect(),
        terminal: et.terminal.clone(),
        terminal_level_sum: et.terminal_level_sum,
        counting_bounds_hold: et.counting_bounds_hold(),
        ancestor_closed: is_ancestor_closed(&pt, &et),
        is_partition: is_tree_partition(&pt, &light),
        lights: light
            .lights
            .iter()
            .map(|l| LightOut {
                domain: l.domain,
                level: l.level,
                root: tree.label(l.root),
                root_parent: l.root_parent.map(|v| tree.label(v)),
                parent_root: tree.label(l.parent_root),
                generic: l.generic,
                size: pt.domain(l.domain).members.len(),
            })
            .collect(),
        w4,
        split_residual: residual,
        split_ok: residual <= SPLIT_TOLERANCE,
        passed: et.counting_bounds_hold()
            && is_ancestor_closed(&pt, &et)
            && is_tree_partition(&pt, &light)
            && w4.pass
            && residual <= SPLIT_TOLERANCE
            && components.iter().all(|c| c.x_ok && c.gamma_ok)
            && gammas.iter().all(|g| g.count as u128 <= g.cap),
        components,
        gamma_counts: gammas,
    };
    out.json("decompose.json", &doc)
}

// ---------------------------------------------------------------- entropy

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OperatorArg {
    /// the dyadic operator W
    W,
    /// the weighted summation operator V
    V,
}

#[derive(Args, Debug)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', num_args = 1.., default_value = "4,8,16,32,64")]
    pub n_grid: Vec<usize>,
    /// Candidate points for the packing lower bound
    #[arg(long, default_value_t = 2048)]
    pub budget: usize,
    #[arg(long, value_enum, default_value = "w")]
    pub operator: OperatorArg,
    /// Print the sampled light-partition bounds instead (not certified)
    #[arg(long)]
    pub pipeline: bool,
    /// Measures sampled for --pipeline
    #[arg(long, default_value_t = 50)]
    pub measures: usize,
    #[arg(long, default_value_t = 16)]
    pub support: usize,
}

#[derive(Serialize)]
struct EntropyRow {
    n: usize,
    lower: f64,
    upper: f64,
    method_lower: String,
    method_upper: String,
    slope_fit: Option<f64>,
}

pub fn entropy(a: &EntropyArgs, out: &Target) -> Result<()> {
    let wt = a.instance.load()?;
    let cfg = EstimatorConfig { budget: a.budget, seed: a.instance.seed, ..EstimatorConfig::default() };
    if a.pipeline {
        let rows = pipeline(&wt, a, &cfg)?;
        return out.csv("entropy.csv", &rows);
    }
    let op = match a.operator {
        OperatorArg::W => ColumnOperator::from_w(&LevelPartition::new(&wt)),
        OperatorArg::V => ColumnOperator::from_v(&wt),
    };
    let est = estimate(&op, &a.n_grid, &cfg)?;
    let slope = loglog_slope(&est.iter().map(|e| (e.n as f64, e.upper)).collect::<Vec<_>>());
    let rows: Vec<EntropyRow> = est
        .iter()
        .map(|e| EntropyRow {
            n: e.n,
            lower: e.lower,
            upper: e.upper,
            method_lower: e.method_lower.to_string(),
            method_upper: e.method_upper.to_string(),
            slope_fit: slope,
        })
        .collect();
    out.csv("entropy.csv", &rows)
}

fn pipeline(wt: &WeightedTree, a: &EntropyArgs, cfg: &EstimatorConfig) -> Result<Vec<PipelineRow>> {
    let max_n = a.n_grid.iter().copied().max().unwrap_or(1);
    let (ctx, _, chain) = chain_for(wt, max_n, Mode::Exact, true)?;
    let pt = partition_from_roots(&ctx, &chain);
    let mus = sample_measures(wt.len(), a.measures, a.support, a.instance.seed);
    let mut lights: Vec<(usize, LightPartition)> = Vec::new();
    for mu in &mus {
        for &n in &a.n_grid {
            let et = essential_tree(&pt, mu, n)?;
            lights.push((n, light_partition(&ctx, &pt, &et)));
        }
    }
    Ok(pipeline_bounds(ctx.levels(), &lights, &a.n_grid, cfg))
}

// ---------------------------------------------------------------- verify

/// `a..b`, `a..=b` or a comma-separated list.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("bad seed `{x}`"));
        let seeds: Vec<u64> = if let Some((lo, hi)) = s.split_once("..=") {
            (num(lo)?..=num(hi)?).collect()
        } else if let Some((lo, hi)) = s.split_once("..") {
            (num(lo)?..num(hi)?).collect()
        } else {
            s.split(',').map(num).collect::<std::result::Result<_, _>>()?
        };
        if seeds.is_empty() {
            return Err(format!("`{s}` names no seeds"));
        }
        Ok(Self(seeds))
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Levels of the root chain
    #[arg(long, default_value_t = 64)]
    pub levels: usize,
    /// Levels whose chain properties are checked in full
    #[arg(long, default_value_t = 12)]
    pub check_levels: usize,
    /// Random measures for the decomposition checks
    #[arg(long, default_value_t = 50)]
    pub measures: usize,
    #[arg(long, default_value_t = 16)]
    pub support: usize,
    #[arg(long, action = ArgAction::Set, value_delimiter = ',', num_args = 1.., default_value = "4,16,64")]
    pub n_values: Vec<usize>,
    /// Node limit for exact covering numbers
    #[arg(long, default_value_t = 64)]
    pub exact_limit: usize,
    /// Entropy bounds are checked for n = 1..=entropy-n
    #[arg(long, default_value_t = 8)]
    pub entropy_n: usize,
    /// Verify one instance per seed (`0..20`, `0..=3` or `1,5,9`) in parallel
    #[arg(long, value_name = "SEEDS")]
    pub seeds: Option<SeedList>,
}

#[derive(Serialize)]
struct SeedReport {
    seed: u64,
    #[serde(flatten)]
    report: VerifyReport,
}

#[derive(Serialize)]
struct MultiReport {
    runs: Vec<SeedReport>,
    passed: bool,
}

fn verify_one(a: &VerifyArgs, seed: u64) -> Result<VerifyReport> {
    let wt = a.instance.load_seeded(seed)?;
    let cfg = VerifyConfig {
        levels: a.levels,
        check_levels: a.check_levels,
        measures: a.measures,
        max_support: a.support,
        n_values: a.n_values.clone(),
        seed,
        exact_limit: a.exact_limit,
        entropy_n: a.entropy_n,
    };
    Ok(arbor::verify::verify(&wt, &cfg)?)
}

fn failures(seed: Option<u64>, r: &VerifyReport) -> usize {
    let mut count = 0;
    for c in r.checks.iter().filter(|c| !c.passed()) {
        match seed {
            Some(s) => eprintln!("seed {s}: {} failed ({} of {} checks) {}", c.name, c.violations, c.checked, c.detail),
            None => eprintln!("{} failed ({} of {} checks) {}", c.name, c.violations, c.checked, c.detail),
        }
        count += 1;
    }
    count
}

pub fn verify(a: &VerifyArgs, out: &Target, jobs: usize) -> Result<()> {
    let bad = match &a.seeds {
        None => {
            let r = verify_one(a, a.instance.seed)?;
            out.json("verify.json", &r)?;
            failures(None, &r)
        }
        Some(SeedList(seeds)) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
            let runs: Vec<SeedReport> = pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&seed| verify_one(a, seed).map(|report| SeedReport { seed, report }))
                    .collect::<Result<_>>()
            })?;
            let bad = runs.iter().map(|r| failures(Some(r.seed), &r.report)).sum();
            let passed = runs.iter().all(|r| r.report.passed);
            out.json("verify.json", &MultiReport { runs, passed })?;
            bad
        }
    };
    if bad > 0 {
        return Err(CliError::Violations(bad));
    }
    Ok(())
}
