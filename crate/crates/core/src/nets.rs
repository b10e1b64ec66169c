//! Covering numbers `N(T, d, ε)`, order covering numbers `Ñ(T, d, ε)` and
//! the schedule `ε_m`.
//!
//! Balls are open. For both `d` and `d_𝕀` the ancestors `s` of `t` with
//! `dist(s, t) < ε` form a segment `[a(t), t]`, so an order net is a set
//! hitting every such vertical segment. A single post-order sweep that only
//! places a center once the highest point of some pending segment is reached
//! gives the minimum, and among minimum nets the unique one of least total
//! depth. The bitmask set cover is kept as an independent oracle for small
//! trees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{DistanceContext, Metric};
use crate::setcover;
use crate::tree::NodeId;
use crate::weights::decay_exponent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoveringResult {
    pub value: usize,
    pub exact: bool,
    pub centers: Vec<NodeId>,
    pub epsilon: f64,
}

/// `ε_m = (m ln 2)^{-(1-1/q)}`.
pub fn epsilon_schedule(m: usize, q: f64) -> f64 {
    (m as f64 * std::f64::consts::LN_2).powf(-decay_exponent(q))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && !eps.is_nan() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps = {eps} must be positive")))
    }
}

/// Open `ε`-balls around every node, as node lists.
fn balls(ctx: &DistanceContext, eps: f64) -> Vec<Vec<NodeId>> {
    let n = ctx.len();
    (0..n).map(|c| (0..n).filter(|&t| c == t || ctx.full_distance(c, t) < eps).collect()).collect()
}

fn to_masks(sets: &[Vec<NodeId>]) -> Vec<u64> {
    sets.iter().map(|s| s.iter().fold(0u64, |m, &t| m | 1 << t)).collect()
}

/// Greedy set cover over explicit node lists; lowest index wins ties.
fn greedy_lists(n: usize, sets: &[Vec<NodeId>]) -> Vec<NodeId> {
    let mut covered = vec![false; n];
    let mut left = n;
    let mut chosen = Vec::new();
    while left > 0 {
        let (best, gain) = sets
            .iter()
            .enumerate()
            .map(|(i, s)| (i, s.iter().filter(|&&t| !covered[t]).count()))
            .fold((0, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!(gain > 0, "every node covers itself");
        for &t in &sets[best] {
            if !covered[t] {
                covered[t] = true;
                left -= 1;
            }
        }
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// `N(T, d, ε)` under `full_distance`. Exact mode is limited to
/// `min(limit, 64)` nodes.
pub fn covering_number(ctx: &DistanceContext, eps: f64, mode: Mode, limit: usize) -> Result<CoveringResult> {
    check_eps(eps)?;
    let n = ctx.len();
    let sets = balls(ctx, eps);
    let centers = match mode {
        Mode::Exact => {
            let cap = limit.min(setcover::MAX_UNIVERSE);
            if n > cap {
                return Err(Error::SizeLimit { size: n, limit: cap });
            }
            setcover::exact(n, &to_masks(&sets))?.expect("balls contain their centers")
        }
        Mode::Greedy => greedy_lists(n, &sets),
    };
    Ok(CoveringResult { value: centers.len(), exact: mode == Mode::Exact, centers, epsilon: eps })
}

/// For every node `t`, the deepest member of `centers` on `[ρ, t]`.
pub fn deepest_centers(ctx: &DistanceContext, centers: &[NodeId]) -> Vec<Option<NodeId>> {
    let tree = ctx.tree();
    let mut is_center = vec![false; ctx.len()];
    for &c in centers {
        is_center[c] = true;
    }
    let mut deepest = vec![None; ctx.len()];
    for &v in tree.preorder() {
        deepest[v] = if is_center[v] { Some(v) } else { tree.parent(v).and_then(|p| deepest[p]) };
    }
    deepest
}

/// The first node (in pre-order) with no center `s ⪯ t` at distance `< ε`,
/// judged by the deepest such candidate.
pub fn uncovered_node(ctx: &DistanceContext, metric: Metric, eps: f64, centers: &[NodeId]) -> Option<NodeId> {
    let deepest = deepest_centers(ctx, centers);
    ctx.tree().preorder().iter().copied().find(|&t| match deepest[t] {
        Some(s) => ctx.distance(metric, s, t) >= eps,
        None => true,
    })
}

pub fn is_order_net(ctx: &DistanceContext, metric: Metric, eps: f64, centers: &[NodeId]) -> bool {
    uncovered_node(ctx, metric, eps, centers).is_none()
}

/// The smallest set `A` such that `existing ∪ A` is an `ε`-order net, and
/// among those the one with least `Σ_{τ ∈ A} |τ|`. Sorted by node id.
pub fn minimal_augmentation(ctx: &DistanceContext, metric: Metric, eps: f64, existing: &[NodeId]) -> Vec<NodeId> {
    let tree = ctx.tree();
    let deepest = deepest_centers(ctx, existing);
    // Depth of the highest admissible center for each still uncovered node.
    let mut pending: Vec<Option<usize>> = vec![None; ctx.len()];
    for t in 0..ctx.len() {
        let top = tree.depth(ctx.cover_top(metric, t, eps));
        let hit = deepest[t].is_some_and(|s| tree.depth(s) >= top);
        if !hit {
            pending[t] = Some(top);
        }
    }
    let mut chosen = Vec::new();
    for &u in tree.preorder().iter().rev() {
        let mut req = pending[u];
        for &c in tree.children(u) {
            req = req.max(pending[c]);
        }
        if req == Some(tree.depth(u)) {
            chosen.push(u);
            req = None;
        }
        pending[u] = req;
    }
    chosen.sort_unstable();
    chosen
}

/// Greedy order net: repeatedly take the candidate covering the most
/// uncovered nodes, lowest id on ties.
fn greedy_order_net(ctx: &DistanceContext, metric: Metric, eps: f64) -> Vec<NodeId> {
    let tree = ctx.tree();
    let n = ctx.len();
    let top: Vec<usize> = (0..n).map(|t| tree.depth(ctx.cover_top(metric, t, eps))).collect();
    let mut gain = vec![0usize; n];
    for (t, &top_t) in top.iter().enumerate() {
        for s in tree.ancestors(t) {
            gain[s] += 1;
            if tree.depth(s) == top_t {
                break;
            }
        }
    }
    let mut covered = vec![false; n];
    let mut left = n;
    let mut chosen = Vec::new();
    while left > 0 {
        let best = (0..n).fold(0, |b, s| if gain[s] > gain[b] { s } else { b });
        chosen.push(best);
        let db = tree.depth(best);
        for &t in tree.subtree(best) {
            if covered[t] || top[t] > db {
                continue;
            }
            covered[t] = true;
            left -= 1;
            for s in tree.ancestors(t) {
                gain[s] -= 1;
                if tree.depth(s) == top[t] {
                    break;
                }
            }
        }
    }
    chosen.sort_unstable();
    chosen
}

/// `Ñ(T, dist, ε)`: the least size of a set `S` with an `s ∈ S`, `s ⪯ t`,
/// `dist(s, t) < ε` for every `t`.
pub fn order_net_number(ctx: &DistanceContext, eps: f64, metric: Metric, mode: Mode) -> Result<CoveringResult> {
    check_eps(eps)?;
    let centers = match mode {
        Mode::Exact => minimal_augmentation(ctx, metric, eps, &[]),
        Mode::Greedy => greedy_order_net(ctx, metric, eps),
    };
    Ok(CoveringResult { value: centers.len(), exact: mode == Mode::Exact, centers, epsilon: eps })
}

/// `Ñ` through the bitmask set cover; candidates cover their descendants
/// within `ε`.
pub fn order_net_set_cover(ctx: &DistanceContext, eps: f64, metric: Metric) -> Result<CoveringResult> {
    check_eps(eps)?;
    let n = ctx.len();
    if n > setcover::MAX_UNIVERSE {
        return Err(Error::SizeLimit { size: n, limit: setcover::MAX_UNIVERSE });
    }
    let sets: Vec<Vec<NodeId>> = (0..n)
        .map(|s| ctx.tree().subtree(s).iter().copied().filter(|&t| ctx.distance(metric, s, t) < eps).collect())
        .collect();
    let centers = setcover::exact(n, &to_masks(&sets))?.expect("every node covers itself");
    Ok(CoveringResult { value: centers.len(), exact: true, centers, epsilon: eps })
}

/// One grid point of the covering/order-net comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationCheck {
    pub epsilon: f64,
    pub covering: usize,
    pub order_net: usize,
    pub order_net_at_2eps: usize,
    /// `N(ε) ≤ Ñ(ε)`
    pub lower_holds: bool,
    /// `Ñ(2ε) ≤ N(ε)`
    pub upper_holds: bool,
    pub covering_centers: Vec<NodeId>,
    pub order_net_centers: Vec<NodeId>,
}

impl RelationCheck {
    pub fn holds(&self) -> bool {
        self.lower_holds && self.upper_holds
    }
}

/// Exact `N` against exact `Ñ` (with respect to `d`) on every grid point.
pub fn verify_covering_relations(ctx: &DistanceContext, eps_grid: &[f64], limit: usize) -> Result<Vec<RelationCheck>> {
    eps_grid
        .iter()
        .map(|&eps| {
            let cover = covering_number(ctx, eps, Mode::Exact, limit)?;
            let net = order_net_number(ctx, eps, Metric::D, Mode::Exact)?;
            let net2 = order_net_number(ctx, 2.0 * eps, Metric::D, Mode::Exact)?;
            Ok(RelationCheck {
                epsilon: eps,
                covering: cover.value,
                order_net: net.value,
                order_net_at_2eps: net2.value,
                lower_holds: cover.value <= net.value,
                upper_holds: net2.value <= cover.value,
                covering_centers: cover.centers,
                order_net_centers: net.centers,
            })
        })
        .collect()
}

/// Covering numbers of the reduced metric `d̂` against the original `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DyadicCheck {
    pub epsilon: f64,
    /// `N(T, d̂, ε)`
    pub reduced: usize,
    /// `N(T, d, ε)`
    pub original: usize,
    /// `N(T, d, 2ε)`
    pub original_at_2eps: usize,
    /// `N(T, d̂, 2ε)`
    pub reduced_at_2eps: usize,
}

impl DyadicCheck {
    /// `N(T, d̂, ε) ≤ N(T, d, 2ε)`
    pub fn literal_holds(&self) -> bool {
        self.reduced <= self.original_at_2eps
    }

    /// `N(T, d, ε) ≤ N(T, d̂, ε)` and `N(T, d̂, 2ε) ≤ N(T, d, ε)`, from
    /// `d ≤ d̂ < 2d`.
    pub fn sandwich_holds(&self) -> bool {
        self.original <= self.reduced && self.reduced_at_2eps <= self.original
    }
}

pub fn compare_dyadic(
    reduced: &DistanceContext,
    original: &DistanceContext,
    eps: f64,
    limit: usize,
) -> Result<DyadicCheck> {
    Ok(DyadicCheck {
        epsilon: eps,
        reduced: covering_number(reduced, eps, Mode::Exact, limit)?.value,
        original: covering_number(original, eps, Mode::Exact, limit)?.value,
        original_at_2eps: covering_number(original, 2.0 * eps, Mode::Exact, limit)?.value,
        reduced_at_2eps: covering_number(reduced, 2.0 * eps, Mode::Exact, limit)?.value,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::tree::RootedTree;
    use crate::weights::WeightedTree;

    fn ctx(parents: &[Option<usize>], sigma: &[f64]) -> DistanceContext {
        let n = parents.len();
        let tree = Arc::new(RootedTree::from_parent_indices(parents).unwrap());
        DistanceContext::new(&WeightedTree::new(tree, vec![1.0; n], sigma.to_vec(), 2.0).unwrap())
    }

    #[test]
    fn schedule() {
        assert!((epsilon_schedule(1, 2.0) - 1.201122408786449).abs() < 1e-12);
        assert!((epsilon_schedule(4, 2.0) - epsilon_schedule(1, 2.0) / 2.0).abs() < 1e-15);
        let e = (std::f64::consts::LN_2 * 3.0).powf(-1.0 / 3.0);
        assert!((epsilon_schedule(3, 1.5) - e).abs() < 1e-15);
    }

    #[test]
    fn covering_examples() {
        let star = ctx(&[None, Some(0), Some(0)], &[1.0; 3]);
        let r = covering_number(&star, 0.5, Mode::Exact, 64).unwrap();
        assert_eq!((r.value, r.centers.clone()), (3, vec![0, 1, 2]));
        assert_eq!(covering_number(&star, 1.01, Mode::Exact, 64).unwrap().value, 1);
        let single = ctx(&[None], &[1.0]);
        assert_eq!(covering_number(&single, 1e-6, Mode::Exact, 64).unwrap().value, 1);
        assert!(matches!(covering_number(&star, 0.5, Mode::Exact, 2), Err(Error::SizeLimit { .. })));
        assert!(covering_number(&star, 0.0, Mode::Exact, 64).is_err());
    }

    #[test]
    fn order_net_examples() {
        let chain = ctx(&[None, Some(0), Some(1)], &[1.0; 3]);
        let r = order_net_number(&chain, 1.1, Metric::D, Mode::Exact).unwrap();
        assert_eq!(r.value, 2);
        assert!(is_order_net(&chain, Metric::D, 1.1, &r.centers));
        assert_eq!(order_net_set_cover(&chain, 1.1, Metric::D).unwrap().value, 2);
        assert_eq!(order_net_number(&chain, 1.5, Metric::D, Mode::Exact).unwrap().centers, vec![0]);
        let single = ctx(&[None], &[1.0]);
        assert_eq!(order_net_number(&single, 0.1, Metric::Localized, Mode::Exact).unwrap().value, 1);
    }

    #[test]
    fn augmentation_prefers_shallow_centers() {
        let chain = ctx(&[None, Some(0), Some(1)], &[1.0; 3]);
        let eps = epsilon_schedule(1, 2.0);
        assert_eq!(minimal_augmentation(&chain, Metric::Localized, eps, &[0]), vec![1]);
        assert_eq!(uncovered_node(&chain, Metric::Localized, eps, &[0]), Some(2));
        assert!(is_order_net(&chain, Metric::Localized, eps, &[0, 2]));
    }

    #[test]
    fn greedy_order_net_is_a_net() {
        let tree =
            ctx(&[None, Some(0), Some(0), Some(1), Some(1), Some(2), Some(5)], &[1.0, 0.9, 0.6, 0.5, 0.4, 0.3, 0.1]);
        for eps in [0.2, 0.5, 0.9, 1.3, 2.0] {
            for metric in [Metric::D, Metric::Localized] {
                let g = order_net_number(&tree, eps, metric, Mode::Greedy).unwrap();
                let e = order_net_number(&tree, eps, metric, Mode::Exact).unwrap();
                assert!(is_order_net(&tree, metric, eps, &g.centers));
                assert!(g.value >= e.value);
            }
        }
    }

    #[test]
    fn dyadic_literal_relation_fails_on_two_nodes() {
        let two = ctx(&[None, Some(0)], &[1.0, 1.0]);
        let c = compare_dyadic(&two, &two, 0.75, 64).unwrap();
        assert_eq!((c.reduced, c.original_at_2eps), (2, 1));
        assert!(!c.literal_holds());
        assert!(c.sandwich_holds());
    }
}
