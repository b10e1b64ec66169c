//! Nested root sets `R_0 ⊆ R_1 ⊆ …`, the tree partitions `𝔅_m` they induce
//! and the inequality that links consecutive levels.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::le_with_slack;
use crate::metrics::{DistanceContext, Metric};
use crate::nets::{deepest_centers, epsilon_schedule, is_order_net, minimal_augmentation, uncovered_node, Mode};
use crate::tree::NodeId;
use crate::weights::WeightedTree;

#[derive(Debug, Clone, Serialize)]
pub struct RootChain {
    /// `R_0, …, R_M`, each sorted by node id.
    pub levels: Vec<Vec<NodeId>>,
    pub q: f64,
    /// `ε_1, …, ε_M`.
    pub eps: Vec<f64>,
    pub mode: Mode,
}

impl RootChain {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// `ε_m` for `m ≥ 1`.
    pub fn epsilon(&self, m: usize) -> f64 {
        self.eps[m - 1]
    }

    /// `R_m \ R_{m-1}`.
    pub fn added(&self, m: usize) -> Vec<NodeId> {
        let prev = &self.levels[m - 1];
        self.levels[m].iter().copied().filter(|t| prev.binary_search(t).is_err()).collect()
    }

    /// Whether property (4) was established by construction.
    pub fn minimal(&self) -> bool {
        self.mode == Mode::Exact
    }
}

fn level_cap(m: usize) -> usize {
    if m >= usize::BITS as usize - 1 {
        usize::MAX
    } else {
        1 << m
    }
}

/// Greedy augmentation: cover the uncovered node farthest from its deepest
/// center (lowest id on ties) by the highest admissible ancestor, repeat.
fn greedy_augmentation(ctx: &DistanceContext, eps: f64, existing: &[NodeId]) -> Vec<NodeId> {
    let tree = ctx.tree();
    let n = ctx.len();
    let mut deepest = deepest_centers(ctx, existing);
    let gap = |deepest: &[Option<NodeId>], t: NodeId| match deepest[t] {
        Some(s) => ctx.localized_distance(s, t),
        None => f64::INFINITY,
    };
    let mut dist: Vec<f64> = (0..n).map(|t| gap(&deepest, t)).collect();
    let mut added = Vec::new();
    loop {
        let far = (0..n).filter(|&t| dist[t] >= eps).fold(None, |b: Option<NodeId>, t| match b {
            Some(b) if dist[b] >= dist[t] => Some(b),
            _ => Some(t),
        });
        let Some(t) = far else { break };
        let c = ctx.cover_top(Metric::Localized, t, eps);
        added.push(c);
        for &v in tree.subtree(c) {
            let better = deepest[v].is_none_or(|s| tree.depth(s) < tree.depth(c));
            if better {
                deepest[v] = Some(c);
                dist[v] = gap(&deepest, v);
            }
        }
    }
    added.sort_unstable();
    added
}

/// Builds `R_1, …, R_M` on top of `R_0 = {ρ}`. In exact mode each `R_m` adds
/// the minimum-size, then least-total-depth, set making it an `ε_m`-order
/// net for `d_𝕀`.
pub fn construct_root_chain(ctx: &DistanceContext, max_level: usize, mode: Mode) -> Result<RootChain> {
    let q = ctx.q();
    let mut levels = vec![vec![ctx.tree().root()]];
    let mut eps = Vec::with_capacity(max_level);
    for m in 1..=max_level {
        let e = epsilon_schedule(m, q);
        let prev = &levels[m - 1];
        let add = match mode {
            Mode::Exact => minimal_augmentation(ctx, Metric::Localized, e, prev),
            Mode::Greedy => greedy_augmentation(ctx, e, prev),
        };
        if add.len() > level_cap(m) {
            return Err(Error::InfeasibleNet { level: m, eps: e, cap: level_cap(m), needed: add.len() });
        }
        let mut next: Vec<NodeId> = prev.iter().copied().chain(add).collect();
        next.sort_unstable();
        next.dedup();
        levels.push(next);
        eps.push(e);
    }
    Ok(RootChain { levels, q, eps, mode })
}

/// Rescales `α` by `c0^{-(1-1/q)}` for the first `c0 ∈ {1, 2, 4, …}` at
/// which the exact chain up to `max_level` exists. Returns the context of the
/// rescaled instance and `c0`.
pub fn fit_to_hypothesis(wt: &WeightedTree, max_level: usize) -> Result<(DistanceContext, f64)> {
    let mut c0 = 1.0;
    loop {
        let scaled = wt.normalize_c0(c0)?;
        let ctx = DistanceContext::new(&scaled);
        match construct_root_chain(&ctx, max_level, Mode::Exact) {
            Ok(_) => return Ok((ctx, c0)),
            Err(Error::InfeasibleNet { .. }) if c0 < 1e300 => c0 *= 2.0,
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub size: usize,
    /// `R_{m-1} ⊆ R_m`
    pub nested: bool,
    /// `#R_m ≤ 2^{m+1}`
    pub size_ok: bool,
    /// `R_m` is an `ε_m`-order net for `d_𝕀`; `true` at `m = 0`.
    pub net_ok: bool,
    pub uncovered: Option<NodeId>,
    /// `None` when the chain was built greedily.
    pub minimal_ok: Option<bool>,
    /// New roots `τ` for which `R_m^τ` is still a net.
    pub replaceable: Vec<NodeId>,
}

impl LevelReport {
    pub fn passed(&self) -> bool {
        self.nested && self.size_ok && self.net_ok && self.minimal_ok != Some(false)
    }
}

/// Whether `R_m^τ = (R_m \ {τ}) ∪ {τ⁻}` is an `ε`-order net, given that
/// `R_m` is one. Only nodes below `τ⁻` can change their best center.
fn replacement_is_net(ctx: &DistanceContext, eps: f64, deepest: &[Option<NodeId>], tau: NodeId) -> bool {
    let tree = ctx.tree();
    let up = tree.parent(tau).expect("the root is never a new center");
    let du = tree.depth(up);
    tree.subtree(up).iter().all(|&t| {
        let s = match deepest[t] {
            Some(s) if s != tau && tree.depth(s) >= du => s,
            _ => up,
        };
        ctx.localized_distance(s, t) < eps
    })
}

/// Checks the four properties level by level up to `upto`.
pub fn check_root_chain(ctx: &DistanceContext, chain: &RootChain, upto: usize) -> Vec<LevelReport> {
    let root = ctx.tree().root();
    let mut out = vec![LevelReport {
        level: 0,
        size: chain.levels[0].len(),
        nested: true,
        size_ok: chain.levels[0] == [root],
        net_ok: true,
        uncovered: None,
        minimal_ok: None,
        replaceable: Vec::new(),
    }];
    for m in 1..=upto.min(chain.max_level()) {
        let eps = chain.epsilon(m);
        let cur = &chain.levels[m];
        let nested = chain.levels[m - 1].iter().all(|t| cur.binary_search(t).is_ok());
        let size_ok = m + 1 >= usize::BITS as usize || cur.len() <= 1 << (m + 1);
        let uncovered = uncovered_node(ctx, Metric::Localized, eps, cur);
        let (minimal_ok, replaceable) = if chain.minimal() && uncovered.is_none() {
            let deepest = deepest_centers(ctx, cur);
            let bad: Vec<NodeId> =
                chain.added(m).into_iter().filter(|&tau| replacement_is_net(ctx, eps, &deepest, tau)).collect();
            (Some(bad.is_empty()), bad)
        } else {
            (None, Vec::new())
        };
        out.push(LevelReport {
            level: m,
            size: cur.len(),
            nested,
            size_ok,
            net_ok: uncovered.is_none(),
            uncovered,
            minimal_ok,
            replaceable,
        });
    }
    out
}

/// The literal replacement test with a full net check; quadratic, for
/// cross-checking on small trees.
pub fn replacement_is_net_naive(ctx: &DistanceContext, chain: &RootChain, m: usize, tau: NodeId) -> bool {
    let up = ctx.tree().parent(tau).expect("the root is never a new center");
    let mut set: Vec<NodeId> = chain.levels[m].iter().copied().filter(|&t| t != tau).collect();
    set.push(up);
    is_order_net(ctx, Metric::Localized, chain.epsilon(m), &set)
}

#[derive(Debug, Clone, Serialize)]
pub struct Domain {
    pub root: NodeId,
    pub level: usize,
    /// Members in pre-order; the root comes first.
    pub members: Vec<NodeId>,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// The partition tree `𝔅`: all domains `B_{r,m}` of all levels.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionTree {
    pub domains: Vec<Domain>,
    /// `by_level[m]`: domain ids of `𝔅_m`, ordered like `R_m`.
    pub by_level: Vec<Vec<usize>>,
    /// `owner[m][t]`: id of the level-`m` domain containing `t`.
    #[serde(skip)]
    owner: Vec<Vec<u32>>,
}

impl PartitionTree {
    pub fn levels(&self) -> usize {
        self.by_level.len()
    }

    pub fn max_level(&self) -> usize {
        self.by_level.len() - 1
    }

    pub fn domain(&self, id: usize) -> &Domain {
        &self.domains[id]
    }

    /// The level-`m` domain containing `t`.
    pub fn owner(&self, m: usize, t: NodeId) -> usize {
        self.owner[m][t] as usize
    }

    pub fn root_domain(&self) -> usize {
        self.by_level[0][0]
    }
}

/// `B_{r,m} = {s ⪰ r : (r, s] ∩ R_m = ∅}` for every `r ∈ R_m`.
pub fn partition_from_roots(ctx: &DistanceContext, chain: &RootChain) -> PartitionTree {
    let tree = ctx.tree();
    let mut domains: Vec<Domain> = Vec::new();
    let mut by_level = Vec::with_capacity(chain.levels.len());
    let mut owner: Vec<Vec<u32>> = Vec::with_capacity(chain.levels.len());
    for (m, roots) in chain.levels.iter().enumerate() {
        let mut id_of = vec![u32::MAX; ctx.len()];
        let mut ids = Vec::with_capacity(roots.len());
        for &r in roots {
            let id = domains.len();
            id_of[r] = id as u32;
            ids.push(id);
            let parent = (m > 0).then(|| owner[m - 1][r] as usize);
            if let Some(p) = parent {
                domains[p].children.push(id);
            }
            domains.push(Domain { root: r, level: m, members: Vec::new(), parent, children: Vec::new() });
        }
        let mut own = vec![0u32; ctx.len()];
        for &v in tree.preorder() {
            own[v] = if id_of[v] != u32::MAX { id_of[v] } else { own[tree.parent(v).expect("root is in R_m")] };
            domains[own[v] as usize].members.push(v);
        }
        owner.push(own);
        by_level.push(ids);
    }
    PartitionTree { domains, by_level, owner }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PartitionReport {
    pub levels: usize,
    /// Each `𝔅_m` partitions `T`.
    pub partitions: bool,
    /// `𝔅_m` refines `𝔅_{m-1}` through the recorded parent links.
    pub refines: bool,
    /// `d_𝕀(r, s) < ε_m` for every `s ∈ B_{r,m}`, `m ≥ 1`.
    pub radius_ok: bool,
    pub radius_violations: Vec<(usize, NodeId, NodeId)>,
    /// `#𝔅_m = #R_m ≤ 2^{m+1}`.
    pub counts_ok: bool,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.partitions && self.refines && self.radius_ok && self.counts_ok
    }
}

pub fn check_partition_tree(
    ctx: &DistanceContext,
    chain: &RootChain,
    pt: &PartitionTree,
    upto: usize,
) -> PartitionReport {
    let n = ctx.len();
    let top = upto.min(pt.max_level());
    let mut rep = PartitionReport {
        levels: top + 1,
        partitions: true,
        refines: true,
        radius_ok: true,
        counts_ok: true,
        ..Default::default()
    };
    for m in 0..=top {
        let ids = &pt.by_level[m];
        let mut seen = vec![false; n];
        for &id in ids {
            let d = &pt.domains[id];
            if d.members.first() != Some(&d.root) {
                rep.partitions = false;
            }
            for &s in &d.members {
                if std::mem::replace(&mut seen[s], true) {
                    rep.partitions = false;
                }
                if m > 0 {
                    if pt.owner(m - 1, s) != d.parent.unwrap() {
                        rep.refines = false;
                    }
                    if ctx.localized_distance(d.root, s) >= chain.epsilon(m) {
                        rep.radius_ok = false;
                        rep.radius_violations.push((m, d.root, s));
                    }
                }
            }
        }
        if seen.iter().any(|x| !x) {
            rep.partitions = false;
        }
        let cap_ok = m + 1 >= usize::BITS as usize || ids.len() <= 1 << (m + 1);
        if ids.len() != chain.levels[m].len() || !cap_ok {
            rep.counts_ok = false;
        }
    }
    rep
}

#[derive(Debug, Clone, Serialize)]
pub struct CrucialTriple {
    pub level: usize,
    pub r: NodeId,
    pub tau: NodeId,
    /// `σ̂(τ)^q Σ_{r ≺ v ⪯ τ⁻, v ≡ τ} α(v)^q`
    pub lhs: f64,
    /// `ε_{m-1}^q − ε_m^q`
    pub rhs: f64,
    pub ok: bool,
}

/// `σ̂(τ)^q Σ_{r ≺ v ⪯ τ⁻, v ≡ τ} α(v)^q` for `r ≺ τ`.
pub fn crucial_lhs(ctx: &DistanceContext, r: NodeId, tau: NodeId) -> f64 {
    let lp = ctx.levels();
    let mut sum = 0.0;
    for v in ctx.tree().ancestors(tau).skip(1) {
        if v == r || !lp.equiv(v, tau) {
            break;
        }
        sum += ctx.alpha_q(v);
    }
    lp.sigma_hat()[tau].powf(ctx.q()) * sum
}

/// Every triple `(m, r, τ)` with `2 ≤ m ≤ upto`, `τ ∈ R_m \ R_{m-1}` and
/// `r ∈ R_{m-1}` the root of the level-`(m-1)` domain containing `τ`.
pub fn check_crucial(ctx: &DistanceContext, chain: &RootChain, pt: &PartitionTree, upto: usize) -> Vec<CrucialTriple> {
    let q = ctx.q();
    let mut out = Vec::new();
    for m in 2..=upto.min(chain.max_level()) {
        let rhs = chain.epsilon(m - 1).powf(q) - chain.epsilon(m).powf(q);
        for tau in chain.added(m) {
            let r = pt.domain(pt.owner(m - 1, tau)).root;
            let lhs = crucial_lhs(ctx, r, tau);
            out.push(CrucialTriple { level: m, r, tau, lhs, rhs, ok: le_with_slack(lhs, rhs) });
        }
    }
    out
}
