//! Heavy and light domains for a measure `μ`, the extremal light partition
//! and the splitting `W = W¹ + W² + W³ + W⁴` along it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::le_with_slack;
use crate::metrics::DistanceContext;
use crate::nets::epsilon_schedule;
use crate::partitions::{crucial_lhs, PartitionTree};
use crate::tree::NodeId;
use crate::weights::{decay_exponent, lq_norm, LevelPartition, SparseVector};

/// The heavy domains `𝔅•` of `𝔅` for `(μ, n)` and their terminal members `𝒬`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssentialTree {
    pub n: usize,
    /// Heavy domain ids, ascending.
    pub heavy: Vec<usize>,
    /// Heavy domains without heavy children, ascending.
    pub terminal: Vec<usize>,
    /// `Σ_{B ∈ 𝒬} |B|`
    pub terminal_level_sum: usize,
}

impl EssentialTree {
    /// `Σ_{B ∈ 𝒬} |B| < n` and `#𝔅• ≤ n`.
    pub fn counting_bounds_hold(&self) -> bool {
        self.terminal_level_sum < self.n && self.heavy.len() <= self.n
    }
}

fn check_measure(mu: &SparseVector) -> Result<()> {
    if mu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    let norm = mu.l1_norm();
    if norm > 1.0 {
        return Err(Error::MeasureTooLarge(norm));
    }
    Ok(())
}

/// `|μ|(B)` for every domain of levels `0..=top`.
fn domain_masses(pt: &PartitionTree, mu: &SparseVector, top: usize) -> Vec<f64> {
    let mut mass = vec![0.0; pt.domains.len()];
    for (t, x) in mu.iter() {
        for m in 0..=top {
            mass[pt.owner(m, t)] += x.abs();
        }
    }
    mass
}

/// `B` is heavy iff `|μ|(B) > |B|/n`; heavy domains have level `< n`, so
/// `𝔅` needs levels up to `n` for the light domains below them.
pub fn essential_tree(pt: &PartitionTree, mu: &SparseVector, n: usize) -> Result<EssentialTree> {
    check_measure(mu)?;
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if pt.max_level() < n {
        return Err(Error::NotEnoughLevels { available: pt.max_level(), needed: n });
    }
    let mass = domain_masses(pt, mu, n - 1);
    let is_heavy = |id: usize| {
        let d = pt.domain(id);
        d.level < n && mass[id] > d.level as f64 / n as f64
    };
    let heavy: Vec<usize> = (0..pt.domains.len()).filter(|&id| is_heavy(id)).collect();
    let terminal: Vec<usize> =
        heavy.iter().copied().filter(|&id| !pt.domain(id).children.iter().any(|&c| is_heavy(c))).collect();
    let terminal_level_sum = terminal.iter().map(|&id| pt.domain(id).level).sum();
    Ok(EssentialTree { n, heavy, terminal, terminal_level_sum })
}

/// Whether every 𝔅-ancestor of a heavy domain is heavy.
pub fn is_ancestor_closed(pt: &PartitionTree, et: &EssentialTree) -> bool {
    et.heavy.iter().all(|&id| pt.domain(id).parent.is_none_or(|p| et.heavy.binary_search(&p).is_ok()))
}

/// A light domain whose 𝔅-parent is heavy, with its marks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightDomain {
    pub domain: usize,
    pub level: usize,
    /// `r∘`, the root of `L`.
    pub root: NodeId,
    /// `r⁻`, the tree parent of `r∘`.
    pub root_parent: Option<NodeId>,
    /// `r•`, the root of the 𝔅-parent of `L`.
    pub parent_root: NodeId,
    /// `r• ≺ r∘`
    pub generic: bool,
}

/// The extremal light partition `𝔏_μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightPartition {
    pub n: usize,
    pub lights: Vec<LightDomain>,
    /// Index into `lights` for every node.
    pub light_of: Vec<usize>,
    /// The heavy set this partition was derived from.
    pub heavy: Vec<usize>,
}

/// For each node `s`, the domain `B_{m₀}(s)` at the first light level of its
/// domain chain.
pub fn light_partition(ctx: &DistanceContext, pt: &PartitionTree, et: &EssentialTree) -> LightPartition {
    let tree = ctx.tree();
    let mut lights = Vec::new();
    for &h in &et.heavy {
        for &c in &pt.domain(h).children {
            if et.heavy.binary_search(&c).is_err() {
                let d = pt.domain(c);
                let parent_root = pt.domain(h).root;
                lights.push(LightDomain {
                    domain: c,
                    level: d.level,
                    root: d.root,
                    root_parent: tree.parent(d.root),
                    parent_root,
                    generic: parent_root != d.root,
                });
            }
        }
    }
    let mut light_of = vec![usize::MAX; ctx.len()];
    for (i, l) in lights.iter().enumerate() {
        for &s in &pt.domain(l.domain).members {
            light_of[s] = i;
        }
    }
    LightPartition { n: et.n, lights, light_of, heavy: et.heavy.clone() }
}

/// Lights are pairwise disjoint and cover `T`.
pub fn is_tree_partition(pt: &PartitionTree, light: &LightPartition) -> bool {
    let n = light.light_of.len();
    let total: usize = light.lights.iter().map(|l| pt.domain(l.domain).members.len()).sum();
    let covered = light.light_of.iter().all(|&i| i != usize::MAX);
    let consistent = light
        .lights
        .iter()
        .enumerate()
        .all(|(i, l)| pt.domain(l.domain).members.iter().all(|&s| light.light_of[s] == i));
    total == n && covered && consistent
}

/// `W¹μ, W²μ, W³μ, W⁴μ`: each column `Wδ_s`, `s ∈ L`, is split along
/// `[ρ, r•]`, `(r•, r⁻]`, `{r∘}` and `(r∘, s]`.
pub fn split_all(lp: &LevelPartition, light: &LightPartition, mu: &SparseVector) -> [Vec<f64>; 4] {
    let tree = lp.tree();
    let n = lp.len();
    let mut parts = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let alpha = lp.alpha();
    let hat = lp.sigma_hat();
    for (s, x) in mu.iter() {
        let l = &light.lights[light.light_of[s]];
        let d_bullet = tree.depth(l.parent_root);
        let d_circ = tree.depth(l.root);
        let lam = lp.lambda(s);
        for t in tree.ancestors(s) {
            let dt = tree.depth(t);
            let part = if dt <= d_bullet {
                0
            } else if dt < d_circ {
                1
            } else if dt == d_circ {
                2
            } else {
                3
            };
            parts[part][t] += hat[s] * alpha[t] * x;
            if t == lam {
                break;
            }
        }
    }
    parts
}

/// `W^i_𝔏 μ` for `part ∈ 1..=4`.
pub fn split_operator(lp: &LevelPartition, light: &LightPartition, mu: &SparseVector, part: usize) -> Result<Vec<f64>> {
    if !(1..=4).contains(&part) {
        return Err(Error::InvalidParameter(format!("part {part} is not in 1..=4")));
    }
    Ok(split_all(lp, light, mu)[part - 1].clone())
}

/// `‖W⁴_{𝔏_μ} μ‖_q` against `(n ln 2)^{-(1-1/q)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct W4Certificate {
    pub norm: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn w4_bound(n: usize, q: f64) -> f64 {
    (n as f64 * std::f64::consts::LN_2).powf(-decay_exponent(q))
}

pub fn w4_certificate(
    lp: &LevelPartition,
    pt: &PartitionTree,
    light: &LightPartition,
    mu: &SparseVector,
    n: usize,
) -> Result<W4Certificate> {
    if mu.is_empty() {
        let bound = w4_bound(n, lp.q());
        return Ok(W4Certificate { norm: 0.0, bound, pass: true });
    }
    let et = essential_tree(pt, mu, n)?;
    if light.n != n || et.heavy != light.heavy {
        return Err(Error::MismatchedPartition);
    }
    let w4 = &split_all(lp, light, mu)[3];
    let norm = lq_norm(w4, lp.q());
    let bound = w4_bound(n, lp.q());
    Ok(W4Certificate { norm, bound, pass: norm <= bound * (1.0 + crate::REL_SLACK) })
}

/// Per generic light `L` with `|L| ≥ 2`: `‖x_L‖_q` and `γ_L = σ̂(r∘)α(r∘)`
/// with their bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentDatum {
    pub light: usize,
    pub level: usize,
    pub x_norm: f64,
    /// `ε_{|L|-1}^q − ε_{|L|}^q`, bounding `‖x_L‖_q^q`.
    pub x_bound: f64,
    pub gamma: f64,
    /// `ε_{|L|-1}`
    pub gamma_bound: f64,
    pub x_ok: bool,
    pub gamma_ok: bool,
}

pub fn component_data(light: &LightPartition, ctx: &DistanceContext) -> Vec<ComponentDatum> {
    let q = ctx.q();
    let lp = ctx.levels();
    light
        .lights
        .iter()
        .enumerate()
        .filter(|(_, l)| l.generic && l.level >= 2)
        .map(|(i, l)| {
            let xq = crucial_lhs(ctx, l.parent_root, l.root);
            let prev = epsilon_schedule(l.level - 1, q);
            let x_bound = prev.powf(q) - epsilon_schedule(l.level, q).powf(q);
            let gamma = lp.sigma_hat()[l.root] * lp.alpha()[l.root];
            ComponentDatum {
                light: i,
                level: l.level,
                x_norm: xq.powf(1.0 / q),
                x_bound,
                gamma,
                gamma_bound: prev,
                x_ok: le_with_slack(xq, x_bound),
                gamma_ok: le_with_slack(gamma, prev),
            }
        })
        .collect()
}

/// `#{L generic : γ_L ≥ ε_m}` for `m = 1..=max_m`, paired with `2^{m+3}`.
pub fn gamma_counts(light: &LightPartition, ctx: &DistanceContext, max_m: usize) -> Vec<(usize, usize, u128)> {
    let lp = ctx.levels();
    let gammas: Vec<f64> =
        light.lights.iter().filter(|l| l.generic).map(|l| lp.sigma_hat()[l.root] * lp.alpha()[l.root]).collect();
    (1..=max_m)
        .map(|m| {
            let e = epsilon_schedule(m, ctx.q());
            let count = gammas.iter().filter(|&&g| g >= e).count();
            (m, count, 1u128.checked_shl(m as u32 + 3).unwrap_or(u128::MAX))
        })
        .collect()
}

/// Subtrees of `𝔅` (containing the root domain, closed under 𝔅-parents)
/// whose terminal levels sum to less than `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubtreeCount {
    pub n: usize,
    pub brute_force: u128,
    pub dynamic: u128,
    /// `(8e)^n`
    pub bound: f64,
}

/// Largest number of subtrees the exhaustive enumeration will visit.
pub const ENUMERATION_LIMIT: u128 = 50_000_000;

pub fn enumerate_partitions(pt: &PartitionTree, n: usize) -> Result<SubtreeCount> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if pt.max_level() + 1 < n {
        return Err(Error::NotEnoughLevels { available: pt.max_level(), needed: n - 1 });
    }
    let dynamic = count_dp(pt, pt.root_domain(), n)[..n].iter().fold(0u128, |a, &b| a.saturating_add(b));
    let total = all_subtrees(pt, pt.root_domain(), n);
    if total > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit {
            size: total.min(usize::MAX as u128) as usize,
            limit: ENUMERATION_LIMIT as usize,
        });
    }
    let mut brute_force = 0u128;
    let mut stack = vec![pt.root_domain()];
    enumerate(pt, n, &mut stack, &mut brute_force);
    Ok(SubtreeCount { n, brute_force, dynamic, bound: (8.0 * std::f64::consts::E).powi(n as i32) })
}

/// Generating polynomial of subtrees rooted at `id` by terminal level sum,
/// truncated to degree `< n`: `x^{|B|} + Π_c (1 + g_c) − 1`.
fn count_dp(pt: &PartitionTree, id: usize, n: usize) -> Vec<u128> {
    let d = pt.domain(id);
    let mut prod = vec![0u128; n];
    prod[0] = 1;
    if d.level + 1 < n {
        for &c in &d.children {
            let g = count_dp(pt, c, n);
            let mut next = prod.clone();
            for i in 0..n {
                for j in 0..n - i {
                    next[i + j] = next[i + j].saturating_add(prod[i].saturating_mul(g[j]));
                }
            }
            prod = next;
        }
    }
    prod[0] -= 1;
    if d.level < n {
        prod[d.level] = prod[d.level].saturating_add(1);
    }
    prod
}

/// Number of subtrees rooted at `id` using domains of level `< n`.
fn all_subtrees(pt: &PartitionTree, id: usize, n: usize) -> u128 {
    let d = pt.domain(id);
    if d.level >= n {
        return 0;
    }
    d.children.iter().fold(1u128, |acc, &c| acc.saturating_mul(1 + all_subtrees(pt, c, n)))
}

/// Depth-first enumeration of all subtrees through a frontier of open
/// domains: each open domain is either terminal or expanded by a nonempty
/// set of its children.
fn enumerate(pt: &PartitionTree, n: usize, frontier: &mut Vec<usize>, count: &mut u128) {
    fn go(pt: &PartitionTree, n: usize, open: &mut Vec<usize>, terminal_sum: usize, count: &mut u128) {
        if terminal_sum >= n {
            return;
        }
        let Some(id) = open.pop() else {
            *count += 1;
            return;
        };
        let d = pt.domain(id);
        go(pt, n, open, terminal_sum + d.level, count);
        let kids: Vec<usize> = d.children.iter().copied().filter(|&c| pt.domain(c).level < n).collect();
        for mask in 1u64..(1u64 << kids.len()) {
            let before = open.len();
            open.extend(kids.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &c)| c));
            go(pt, n, open, terminal_sum, count);
            open.truncate(before);
        }
        open.push(id);
    }
    go(pt, n, frontier, 0, count);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, InstanceSpec};
    use crate::nets::Mode;
    use crate::partitions::{construct_root_chain, fit_to_hypothesis, partition_from_roots};

    fn setup(depth: usize, levels: usize) -> (DistanceContext, PartitionTree) {
        let wt = generate(&InstanceSpec::corollary(depth)).unwrap();
        let ctx = DistanceContext::new(&wt);
        let chain = construct_root_chain(&ctx, levels, Mode::Exact).unwrap();
        let pt = partition_from_roots(&ctx, &chain);
        (ctx, pt)
    }

    #[test]
    fn delta_with_n_one() {
        let (ctx, pt) = setup(5, 4);
        let et = essential_tree(&pt, &SparseVector::delta(9), 1).unwrap();
        assert_eq!(et.heavy, vec![pt.root_domain()]);
        assert_eq!(et.terminal_level_sum, 0);
        let light = light_partition(&ctx, &pt, &et);
        assert_eq!(light.lights.len(), pt.by_level[1].len());
        assert!(is_tree_partition(&pt, &light));
    }

    #[test]
    fn measure_errors() {
        let (_, pt) = setup(3, 4);
        assert_eq!(essential_tree(&pt, &SparseVector::new(), 2), Err(Error::EmptyMeasure));
        let big = SparseVector::from_pairs([(0, 0.8), (1, 0.5)]);
        assert!(matches!(essential_tree(&pt, &big, 2), Err(Error::MeasureTooLarge(_))));
        assert!(matches!(essential_tree(&pt, &SparseVector::delta(0), 5), Err(Error::NotEnoughLevels { .. })));
    }

    #[test]
    fn splitting_sums_to_w() {
        let (ctx, pt) = setup(6, 8);
        let mu = SparseVector::from_pairs([(3, 0.3), (40, -0.25), (100, 0.2), (7, 0.1)]);
        for n in [2, 4, 8] {
            let et = essential_tree(&pt, &mu, n).unwrap();
            let light = light_partition(&ctx, &pt, &et);
            let parts = split_all(ctx.levels(), &light, &mu);
            let w = ctx.levels().apply_w(&mu);
            for t in 0..ctx.len() {
                let sum: f64 = parts.iter().map(|p| p[t]).sum();
                assert!((sum - w[t]).abs() <= 1e-14);
            }
            for (i, l) in light.lights.iter().enumerate() {
                if !l.generic {
                    for &s in &pt.domain(l.domain).members {
                        assert_eq!(light.light_of[s], i);
                        let col = split_all(ctx.levels(), &light, &SparseVector::delta(s));
                        assert!(col[1].iter().chain(&col[2]).all(|&x| x == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn w4_mismatch_is_detected() {
        let (ctx, pt) = setup(6, 8);
        let a = SparseVector::delta(63);
        let b = SparseVector::delta(126);
        let ea = essential_tree(&pt, &a, 8).unwrap();
        assert_ne!(ea.heavy, essential_tree(&pt, &b, 8).unwrap().heavy);
        let la = light_partition(&ctx, &pt, &ea);
        assert!(w4_certificate(ctx.levels(), &pt, &la, &a, 8).unwrap().pass);
        assert_eq!(w4_certificate(ctx.levels(), &pt, &la, &b, 8), Err(Error::MismatchedPartition));
        assert_eq!(w4_certificate(ctx.levels(), &pt, &la, &a, 7), Err(Error::MismatchedPartition));
        let zero = w4_certificate(ctx.levels(), &pt, &la, &SparseVector::new(), 8).unwrap();
        assert_eq!(zero.norm, 0.0);
    }

    #[test]
    fn w4_bound_value() {
        assert!((w4_bound(16, 2.0) - 0.300_28).abs() < 1e-5);
    }

    #[test]
    fn subtree_counts_agree() {
        let wt = generate(&InstanceSpec::random(40, 11)).unwrap();
        let (ctx, _) = fit_to_hypothesis(&wt, 4).unwrap();
        let chain = construct_root_chain(&ctx, 4, Mode::Exact).unwrap();
        let pt = partition_from_roots(&ctx, &chain);
        for n in 1..=4 {
            let c = enumerate_partitions(&pt, n).unwrap();
            assert_eq!(c.brute_force, c.dynamic);
            assert!((c.brute_force as f64) <= c.bound);
        }
        assert_eq!(enumerate_partitions(&pt, 1).unwrap().brute_force, 1);
    }
}
