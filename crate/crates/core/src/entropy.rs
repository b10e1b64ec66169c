//! Certified one-sided bounds for dyadic entropy numbers
//! `e_n(A) = inf{ε : A(B_{ℓ₁}) is covered by 2^{n-1} open ε-balls}` of
//! finite-rank operators `ℓ₁ → ℓ_q`, given by their columns.
//!
//! Upper bounds multiply coverings of coordinate blocks: if the rows split
//! into blocks `P_1, …, P_b`, the image lies in the product of the images of
//! `P_i A`, and coverings with `N_i` balls of radius `r_i` combine into
//! `Π N_i` balls of radius `(Σ r_i^q)^{1/q}`. Each block is covered by the
//! cheapest of: nothing (zero block), one ball at the origin, an empirical
//! (Maurey) lattice, an interval subdivision (rank one) or a volumetric
//! covering of its bounding ball. Blocks are contiguous ranges of row depth;
//! their choice and the bit allocation are optimized jointly.
//!
//! Lower bounds are packings: `2^{n-1}+1` image points pairwise farther than
//! `2δ` apart force `e_n ≥ δ`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::LightPartition;
use crate::error::{Error, Result};
use crate::tree::NodeId;
use crate::weights::{decay_exponent, LevelPartition, WeightedTree};
use crate::REL_SLACK;

/// Sorted `(row, value)` pairs with no zeros.
pub type SparseColumn = Vec<(usize, f64)>;

/// `‖x‖_q` computed relative to the largest entry, so that scaling by a
/// power of two scales the result exactly.
fn lq_of(x: &[f64], q: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * x.iter().map(|v| (v.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
}

fn lq_sparse(v: &SparseColumn, q: f64) -> f64 {
    lq_of(&v.iter().map(|e| e.1).collect::<Vec<_>>(), q)
}

/// `‖a − b‖_q` by merging.
pub fn lq_distance(a: &SparseColumn, b: &SparseColumn, q: f64) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut diff = Vec::with_capacity(a.len() + b.len());
    while i < a.len() || j < b.len() {
        let d = match (a.get(i), b.get(j)) {
            (Some(&(ra, xa)), Some(&(rb, xb))) if ra == rb => {
                i += 1;
                j += 1;
                xa - xb
            }
            (Some(&(ra, xa)), Some(&(rb, _))) if ra < rb => {
                i += 1;
                xa
            }
            (Some(&(_, xa)), None) => {
                i += 1;
                xa
            }
            (_, Some(&(_, xb))) => {
                j += 1;
                -xb
            }
            (None, None) => unreachable!(),
        };
        diff.push(d);
    }
    lq_of(&diff, q)
}

fn axpy(acc: &mut Vec<(usize, f64)>, a: f64, x: &SparseColumn) {
    acc.extend(x.iter().map(|&(r, v)| (r, a * v)));
}

fn normalize(mut v: Vec<(usize, f64)>) -> SparseColumn {
    v.sort_by_key(|e| e.0);
    let mut out: SparseColumn = Vec::with_capacity(v.len());
    for (r, x) in v {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 += x,
            _ => out.push((r, x)),
        }
    }
    out.retain(|e| e.1 != 0.0);
    out
}

/// An operator `ℓ₁^N → ℓ_q^dim` given by the images of the unit vectors.
#[derive(Debug, Clone, Serialize)]
pub struct ColumnOperator {
    pub dim: usize,
    pub columns: Vec<SparseColumn>,
    pub q: f64,
    pub label: String,
    /// Optional grouping of rows (tree depth) used for block coverings.
    pub row_depth: Option<Vec<usize>>,
}

impl ColumnOperator {
    pub fn new(dim: usize, columns: Vec<Vec<(usize, f64)>>, q: f64, label: impl Into<String>) -> Result<Self> {
        if !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!("q = {q} must be at least 1")));
        }
        let columns: Vec<SparseColumn> = columns.into_iter().map(normalize).collect();
        for c in &columns {
            if let Some(&(r, x)) = c.iter().find(|(r, x)| *r >= dim || !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("column entry ({r}, {x}) outside ℓ_q^{dim}")));
            }
        }
        Ok(Self { dim, columns, q, label: label.into(), row_depth: None })
    }

    pub fn from_dense(columns: &[Vec<f64>], q: f64, label: impl Into<String>) -> Result<Self> {
        let dim = columns.iter().map(Vec::len).max().unwrap_or(0);
        let sparse = columns.iter().map(|c| c.iter().copied().enumerate().collect()).collect();
        Self::new(dim, sparse, q, label)
    }

    pub fn with_row_depth(mut self, depth: Vec<usize>) -> Result<Self> {
        if depth.len() != self.dim {
            return Err(Error::InvalidParameter(format!("{} row depths for dimension {}", depth.len(), self.dim)));
        }
        self.row_depth = Some(depth);
        Ok(self)
    }

    fn tree_depths(wt_tree: &crate::tree::RootedTree) -> Vec<usize> {
        (0..wt_tree.len()).map(|v| wt_tree.depth(v)).collect()
    }

    /// `V` with columns `Vδ_s`.
    pub fn from_v(wt: &WeightedTree) -> Self {
        let columns = (0..wt.len()).map(|s| wt.column_v(s)).collect();
        let op = Self::new(wt.len(), columns, wt.q(), "V").expect("valid weights");
        op.with_row_depth(Self::tree_depths(wt.tree())).unwrap()
    }

    /// `W` with columns `Wδ_s`.
    pub fn from_w(lp: &LevelPartition) -> Self {
        let columns = (0..lp.len()).map(|s| lp.column_w(s)).collect();
        let op = Self::new(lp.len(), columns, lp.q(), "W").expect("valid weights");
        op.with_row_depth(Self::tree_depths(lp.tree())).unwrap()
    }

    /// `W_𝔏 = W¹ + W² + W³`. Its column at `s ∈ L` is `Wδ_{r∘}` when
    /// `s ≡ r∘` and zero otherwise, so one column per light suffices.
    pub fn from_light(lp: &LevelPartition, light: &LightPartition) -> Self {
        let columns = light.lights.iter().map(|l| lp.column_w(l.root)).collect();
        let op = Self::new(lp.len(), columns, lp.q(), "W_L").expect("valid weights");
        op.with_row_depth(Self::tree_depths(lp.tree())).unwrap()
    }

    /// `W^i_𝔏` with one column per node.
    pub fn from_split(lp: &LevelPartition, light: &LightPartition, part: usize) -> Result<Self> {
        let columns = (0..lp.len())
            .map(|s| {
                let col = crate::decomposition::split_operator(lp, light, &crate::SparseVector::delta(s), part)?;
                Ok(col.into_iter().enumerate().collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let op = Self::new(lp.len(), columns, lp.q(), format!("W{part}"))?;
        op.with_row_depth(Self::tree_depths(lp.tree()))
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let columns = self.columns.iter().map(|c| c.iter().map(|&(r, x)| (r, lambda * x)).collect()).collect();
        Self { columns, ..self.clone() }
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns.iter().map(|c| lq_sparse(c, self.q)).collect()
    }

    /// `max_s ‖Aδ_s‖_q`, the operator norm on `ℓ₁`.
    pub fn max_norm(&self) -> f64 {
        self.column_norms().into_iter().fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|c| c.is_empty())
    }

    /// Nonzero columns up to sign and duplicates, normalized so the first
    /// entry is positive.
    pub fn generators(&self) -> Vec<SparseColumn> {
        distinct_up_to_sign(self.columns.iter().cloned())
    }

    /// `Some(w)` when all columns are multiples of one vector; `w` is the
    /// largest column norm.
    pub fn rank_one(&self) -> Option<f64> {
        rank_one_width(&self.generators(), self.q)
    }

    /// Applies the operator to a coefficient vector.
    pub fn apply(&self, coeffs: &[(usize, f64)]) -> SparseColumn {
        let mut acc = Vec::new();
        for &(s, a) in coeffs {
            axpy(&mut acc, a, &self.columns[s]);
        }
        normalize(acc)
    }
}

fn distinct_up_to_sign(cols: impl Iterator<Item = SparseColumn>) -> Vec<SparseColumn> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for c in cols {
        if c.is_empty() {
            continue;
        }
        let c: SparseColumn = if c[0].1 < 0.0 { c.iter().map(|&(r, x)| (r, -x)).collect() } else { c };
        let key: Vec<(usize, u64)> = c.iter().map(|&(r, x)| (r, x.to_bits())).collect();
        if seen.insert(key) {
            out.push(c);
        }
    }
    out
}

fn rank_one_width(gens: &[SparseColumn], q: f64) -> Option<f64> {
    let first = gens.first()?;
    for g in &gens[1..] {
        if g.len() != first.len() || g.iter().zip(first).any(|(a, b)| a.0 != b.0) {
            return None;
        }
        let ratio = g[0].1 / first[0].1;
        let parallel = g.iter().zip(first).all(|(a, b)| (a.1 - ratio * b.1).abs() <= 1e-12 * a.1.abs().max(b.1.abs()));
        if !parallel {
            return None;
        }
    }
    Some(gens.iter().map(|g| lq_sparse(g, q)).fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// Counting helpers

fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `log₂ #{z ∈ ℤ^N : ‖z‖₁ ≤ k} = log₂ Σ_j 2^j C(N, j) C(k, j)`.
pub fn lattice_log2_count(generators: usize, k: usize) -> f64 {
    let terms: Vec<f64> = (0..=generators.min(k))
        .map(|j| j as f64 * std::f64::consts::LN_2 + ln_choose(generators, j) + ln_choose(k, j))
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    (top + s.ln()) / std::f64::consts::LN_2
}

/// Distance from any hull point to the nearest `k`-term average: `w/√k` in
/// Hilbert space, `2w·k^{-(1-1/q)}` for `1 ≤ q < 2`.
pub fn maurey_error(width: f64, k: usize, q: f64) -> f64 {
    if q == 2.0 {
        width / (k as f64).sqrt()
    } else {
        2.0 * width * (k as f64).powf(-decay_exponent(q))
    }
}

/// Quarter-bit units needed for `2^{log2}` balls.
fn units_for(log2: f64) -> usize {
    (4.0 * (log2 + 1e-9)).ceil().max(0.0) as usize
}

// ---------------------------------------------------------------------------
// Block coverings

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BlockCover {
    Zero,
    /// One ball at the origin.
    Origin,
    /// All lattice points `z/k · A`, `‖z‖₁ ≤ k`.
    Lattice {
        k: usize,
    },
    /// Equal subdivision of a segment into `count` pieces.
    Interval {
        count: u64,
    },
    /// Covering of the bounding ball in a `dim`-dimensional space.
    Volume {
        count: u64,
        dim: usize,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockChoice {
    /// Row depths `lo..hi`.
    pub lo: usize,
    pub hi: usize,
    pub cover: BlockCover,
    pub log2_count: f64,
    pub radius: f64,
}

struct BlockStats {
    generators: usize,
    width: f64,
    dim: usize,
    rank_one: bool,
}

fn block_stats(op: &ColumnOperator, keep: impl Fn(usize) -> bool) -> BlockStats {
    let gens = distinct_up_to_sign(op.columns.iter().map(|c| c.iter().copied().filter(|&(r, _)| keep(r)).collect()));
    let rows: HashSet<usize> = gens.iter().flat_map(|g| g.iter().map(|e| e.0)).collect();
    let rank_one = rank_one_width(&gens, op.q).is_some();
    let width = gens.iter().map(|g| lq_sparse(g, op.q)).fold(0.0, f64::max);
    BlockStats { generators: gens.len(), width, dim: rows.len(), rank_one }
}

/// Largest Maurey `k` tried; also keeps the search within 32-bit `usize`.
const LATTICE_K_CAP: usize = if usize::BITS >= 64 { 1 << 40 } else { 1 << 30 };

/// For each budget `u ∈ 0..=units` (quarter bits), the cheapest covering
/// of one block as `(radius^q, choice)`.
fn block_menu(stats: &BlockStats, q: f64, units: usize) -> Vec<(f64, BlockCover, f64, f64)> {
    let w = stats.width;
    if w == 0.0 {
        return vec![(0.0, BlockCover::Zero, 0.0, 0.0); units + 1];
    }
    let mut best: Vec<(f64, BlockCover, f64, f64)> = vec![(w.powf(q), BlockCover::Origin, 0.0, w); units + 1];
    let mut offer = |u: usize, r: f64, cover: BlockCover, log2: f64| {
        if u <= units && r.powf(q) < best[u].0 {
            best[u] = (r.powf(q), cover, log2, r);
        }
    };
    // Largest k affordable with u units, by bisection (the count grows in k).
    let fits = |k: usize, u: usize| units_for(lattice_log2_count(stats.generators, k)) <= u;
    let mut k_lo = 0;
    for u in 0..=units {
        if !fits(k_lo.max(1), u) {
            continue;
        }
        let (mut lo, mut hi) = (k_lo.max(1), k_lo.max(1) * 2);
        while fits(hi, u) && hi < LATTICE_K_CAP {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if fits(mid, u) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        k_lo = lo;
        let log2 = lattice_log2_count(stats.generators, lo);
        offer(u, maurey_error(w, lo, q), BlockCover::Lattice { k: lo }, log2);
    }
    for u in 1..=units {
        let count = 2f64.powf(u as f64 / 4.0).floor();
        if count < 2.0 || count > u64::MAX as f64 {
            continue;
        }
        let log2 = count.log2();
        if stats.rank_one || stats.dim == 1 {
            offer(u, w / count, BlockCover::Interval { count: count as u64 }, log2);
        }
        if stats.dim > 0 {
            let grow = count.powf(1.0 / stats.dim as f64) - 1.0;
            if grow > 0.0 {
                offer(u, 2.0 * w / grow, BlockCover::Volume { count: count as u64, dim: stats.dim }, log2);
            }
        }
    }
    // Any smaller budget is also allowed.
    for u in 1..=units {
        if best[u - 1].0 < best[u].0 {
            best[u] = best[u - 1];
        }
    }
    best
}

/// Best block-product covering for every `n` in `1..=max_n`.
///
/// Radii are computed in units of `‖A‖` so the choices do not depend on scale.
fn block_product(op: &ColumnOperator, max_n: usize) -> Vec<(f64, Vec<BlockChoice>)> {
    let units = 4 * (max_n - 1);
    let scale = op.max_norm();
    let depth: Vec<usize> = op.row_depth.clone().unwrap_or_else(|| vec![0; op.dim]);
    let levels = depth.iter().copied().max().map_or(1, |d| d + 1);
    // menus[lo][hi - lo - 1]
    let mut menus = Vec::with_capacity(levels);
    for lo in 0..levels {
        let mut row = Vec::with_capacity(levels - lo);
        for hi in lo + 1..=levels {
            let mut stats = block_stats(op, |r| depth[r] >= lo && depth[r] < hi);
            stats.width /= scale;
            row.push(block_menu(&stats, op.q, units));
        }
        menus.push(row);
    }
    // best[d][u]: least Σ r^q covering depths < d with u units; back pointers.
    let inf = f64::INFINITY;
    let mut best = vec![vec![inf; units + 1]; levels + 1];
    let mut back = vec![vec![(0usize, 0usize); units + 1]; levels + 1];
    best[0] = vec![0.0; units + 1];
    for hi in 1..=levels {
        for lo in 0..hi {
            let menu = &menus[lo][hi - lo - 1];
            for u in 0..=units {
                for v in 0..=u {
                    let val = best[lo][u - v] + menu[v].0;
                    if val < best[hi][u] {
                        best[hi][u] = val;
                        back[hi][u] = (lo, v);
                    }
                }
            }
        }
    }
    (1..=max_n)
        .map(|n| {
            let mut u = 4 * (n - 1);
            let mut hi = levels;
            let mut choices = Vec::new();
            while hi > 0 {
                let (lo, v) = back[hi][u];
                let (_, cover, log2, radius) = menus[lo][hi - lo - 1][v];
                choices.push(BlockChoice { lo, hi, cover, log2_count: log2, radius: radius * scale });
                u -= v;
                hi = lo;
            }
            choices.reverse();
            let total: f64 = choices.iter().map(|c| (c.radius / scale).powf(op.q)).sum();
            (scale * total.powf(1.0 / op.q), choices)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Explicit surrogate coverings for small operators

/// All points `Σ z_i g_i / k` with `‖z‖₁ ≤ k`.
fn lattice_points(gens: &[SparseColumn], k: usize) -> Vec<SparseColumn> {
    fn rec(
        gens: &[SparseColumn],
        k: usize,
        i: usize,
        left: usize,
        acc: &mut Vec<(usize, f64)>,
        out: &mut Vec<SparseColumn>,
    ) {
        if i == gens.len() {
            out.push(normalize(acc.clone()));
            return;
        }
        let l = left as i64;
        for z in -l..=l {
            let before = acc.len();
            if z != 0 {
                axpy(acc, z as f64 / k as f64, &gens[i]);
            }
            rec(gens, k, i + 1, left - z.unsigned_abs() as usize, acc, out);
            acc.truncate(before);
        }
    }
    let mut out = Vec::new();
    rec(gens, k, 0, k, &mut Vec::new(), &mut out);
    out
}

/// Farthest-point traversal starting at `first`. Returns the visiting order
/// and, for each prefix length `m ≥ 1`, the largest distance from any point
/// to the first `m` chosen (`radii[m-1]`), which is also the distance at
/// which point `m+1` was picked.
fn gonzalez(points: &[SparseColumn], q: f64, first: usize, limit: usize) -> (Vec<usize>, Vec<f64>) {
    let mut dist: Vec<f64> = points.iter().map(|p| lq_distance(p, &points[first], q)).collect();
    let mut order = vec![first];
    let mut radii = Vec::new();
    loop {
        // Near-ties go to the lowest index so that rescaled inputs traverse
        // the same way.
        let r = dist.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let far = dist.iter().position(|&d| d >= r * (1.0 - 1e-12)).unwrap_or(0);
        radii.push(r.max(0.0));
        if order.len() >= limit.min(points.len()) || r <= 0.0 {
            break;
        }
        order.push(far);
        for (i, p) in points.iter().enumerate() {
            let d = lq_distance(p, &points[far], q);
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    (order, radii)
}

/// Work cap for the explicit surrogate, in distance evaluations times row count.
const SURROGATE_WORK: f64 = 4e8;

struct Surrogate {
    value: f64,
    k: usize,
    centers: Vec<SparseColumn>,
}

fn surrogate_upper(op: &ColumnOperator, max_n: usize, budget: usize) -> Vec<Option<Surrogate>> {
    let gens = op.generators();
    let mut best: Vec<Option<Surrogate>> = (0..max_n).map(|_| None).collect();
    if gens.is_empty() || gens.len() > 64 {
        return best;
    }
    let w = gens.iter().map(|g| lq_sparse(g, op.q)).fold(0.0, f64::max);
    let nnz = gens.iter().map(Vec::len).sum::<usize>().max(1) as f64;
    let mut k = 1;
    loop {
        let log2 = lattice_log2_count(gens.len(), k);
        if log2 > (budget as f64).log2() || 2f64.powf(2.0 * log2) * nnz > SURROGATE_WORK {
            break;
        }
        let points = lattice_points(&gens, k);
        let origin = points.iter().position(|p| p.is_empty()).unwrap_or(0);
        let limit = 1usize.checked_shl(max_n as u32 - 1).unwrap_or(usize::MAX).min(1 << 30);
        let (order, radii) = gonzalez(&points, op.q, origin, limit);
        let err = maurey_error(w, k, op.q);
        for n in 1..=max_n {
            let m = 1usize.checked_shl(n as u32 - 1).unwrap_or(usize::MAX);
            let r = if m > radii.len() { 0.0 } else { radii[m - 1] };
            let value = err + r;
            if best[n - 1].as_ref().is_none_or(|b| value < b.value) {
                let centers = order.iter().take(m).map(|&i| points[i].clone()).collect();
                best[n - 1] = Some(Surrogate { value, k, centers });
            }
        }
        k += 1;
    }
    best
}

// ---------------------------------------------------------------------------
// Estimates

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperMethod {
    Zero,
    Segment,
    BlockProduct,
    Surrogate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowerMethod {
    None,
    Zero,
    Segment,
    Packing,
}

impl std::fmt::Display for UpperMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Zero => "zero",
            Self::Segment => "segment",
            Self::BlockProduct => "block-product",
            Self::Surrogate => "surrogate",
        })
    }
}

impl std::fmt::Display for LowerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::Zero => "zero",
            Self::Segment => "segment",
            Self::Packing => "packing",
        })
    }
}

/// `e_n ≤ value`: the image is covered by `2^{n-1}` open balls of radius
/// `value·(1 + 10⁻⁹)`.
#[derive(Debug, Clone, Serialize)]
pub struct UpperEstimate {
    pub n: usize,
    pub value: f64,
    pub method: UpperMethod,
    /// Block-product certificate.
    pub blocks: Vec<BlockChoice>,
    /// Surrogate certificate: lattice denominator and explicit centers.
    pub lattice_k: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub centers: Vec<SparseColumn>,
}

/// `e_n ≥ value`: `witness_count` image points pairwise farther than
/// `2·value` apart.
#[derive(Debug, Clone, Serialize)]
pub struct LowerEstimate {
    pub n: usize,
    pub value: f64,
    pub method: LowerMethod,
    pub witness_count: u128,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<SparseColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// Largest number of candidate points for packings and surrogate lattices.
    pub budget: usize,
    pub seed: u64,
    /// Keep explicit centers and witnesses up to this many points.
    pub keep_points: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { budget: 2048, seed: 0, keep_points: 64 }
    }
}

/// Upper bounds for `n = 1..=max_n`.
pub fn entropy_upper_all(op: &ColumnOperator, max_n: usize, cfg: &EstimatorConfig) -> Vec<UpperEstimate> {
    assert!(max_n >= 1);
    let mk = |n: usize, value: f64, method| UpperEstimate {
        n,
        value,
        method,
        blocks: Vec::new(),
        lattice_k: None,
        centers: Vec::new(),
    };
    if op.is_zero() {
        return (1..=max_n).map(|n| mk(n, 0.0, UpperMethod::Zero)).collect();
    }
    if let Some(w) = op.rank_one() {
        return (1..=max_n).map(|n| mk(n, w * 0.5f64.powi(n as i32 - 1), UpperMethod::Segment)).collect();
    }
    let products = block_product(op, max_n);
    let surrogates = surrogate_upper(op, max_n, cfg.budget);
    products
        .into_iter()
        .zip(surrogates)
        .enumerate()
        .map(|(i, ((value, blocks), sur))| match sur {
            Some(s) if s.value < value => UpperEstimate {
                n: i + 1,
                value: s.value,
                method: UpperMethod::Surrogate,
                blocks: Vec::new(),
                lattice_k: Some(s.k),
                centers: if s.centers.len() <= cfg.keep_points { s.centers } else { Vec::new() },
            },
            _ => UpperEstimate {
                n: i + 1,
                value,
                method: UpperMethod::BlockProduct,
                blocks,
                lattice_k: None,
                centers: Vec::new(),
            },
        })
        .collect()
}

pub fn entropy_upper(op: &ColumnOperator, n: usize, cfg: &EstimatorConfig) -> UpperEstimate {
    entropy_upper_all(op, n, cfg).pop().unwrap()
}

/// Candidate image points: the origin, `±` generators, then seeded random
/// sparse convex combinations up to the budget.
fn packing_candidates(op: &ColumnOperator, cfg: &EstimatorConfig) -> Vec<SparseColumn> {
    let gens = op.generators();
    let mut pts: Vec<SparseColumn> = vec![Vec::new()];
    for g in &gens {
        if pts.len() + 2 > cfg.budget {
            break;
        }
        pts.push(g.clone());
        pts.push(g.iter().map(|&(r, x)| (r, -x)).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while pts.len() < cfg.budget && !gens.is_empty() {
        let terms = rng.gen_range(1..=gens.len().min(4));
        let mut weights: Vec<f64> = (0..terms).map(|_| rng.gen_range(0.0..1.0f64) + 1e-3).collect();
        let total: f64 = weights.iter().sum();
        for x in &mut weights {
            *x /= total;
        }
        let mut acc = Vec::new();
        for x in weights {
            let g = &gens[rng.gen_range(0..gens.len())];
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            axpy(&mut acc, sign * x, g);
        }
        pts.push(normalize(acc));
    }
    pts
}

/// Lower bounds for `n = 1..=max_n`.
pub fn entropy_lower_all(op: &ColumnOperator, max_n: usize, cfg: &EstimatorConfig) -> Vec<LowerEstimate> {
    let shrink = 1.0 - REL_SLACK;
    if op.is_zero() {
        return (1..=max_n)
            .map(|n| LowerEstimate {
                n,
                value: 0.0,
                method: LowerMethod::Zero,
                witness_count: 0,
                witnesses: Vec::new(),
            })
            .collect();
    }
    if let Some(w) = op.rank_one() {
        let gen = op.generators().remove(0);
        let unit = lq_sparse(&gen, op.q);
        return (1..=max_n)
            .map(|n| {
                let m = 1u128 << (n - 1).min(126);
                let witnesses = if m < cfg.keep_points as u128 {
                    (0..=m)
                        .map(|i| {
                            let t = (-1.0 + 2.0 * i as f64 / m as f64) * w / unit;
                            gen.iter().map(|&(r, x)| (r, t * x)).filter(|e| e.1 != 0.0).collect()
                        })
                        .collect()
                } else {
                    Vec::new()
                };
                LowerEstimate {
                    n,
                    value: w * 0.5f64.powi(n as i32 - 1) * shrink,
                    method: LowerMethod::Segment,
                    witness_count: m + 1,
                    witnesses,
                }
            })
            .collect();
    }
    let pts = packing_candidates(op, cfg);
    let start = pts
        .iter()
        .enumerate()
        .fold((0, -1.0), |b, (i, p)| {
            let r = lq_sparse(p, op.q);
            if r > b.1 {
                (i, r)
            } else {
                b
            }
        })
        .0;
    let need_max = 1usize.checked_shl(max_n as u32 - 1).map_or(usize::MAX, |m| m.saturating_add(1));
    let (order, radii) = gonzalez(&pts, op.q, start, need_max.min(pts.len()));
    (1..=max_n)
        .map(|n| {
            let need = 1usize.checked_shl(n as u32 - 1).map(|m| m + 1);
            match need {
                // radii[need-2] is the distance at which point `need` was picked,
                // the smallest pairwise distance among the first `need`.
                Some(need) if need <= order.len() => {
                    let gap = radii[need - 2];
                    let witnesses = if need <= cfg.keep_points {
                        order[..need].iter().map(|&i| pts[i].clone()).collect()
                    } else {
                        Vec::new()
                    };
                    LowerEstimate {
                        n,
                        value: gap / 2.0 * shrink,
                        method: LowerMethod::Packing,
                        witness_count: need as u128,
                        witnesses,
                    }
                }
                _ => {
                    LowerEstimate { n, value: 0.0, method: LowerMethod::None, witness_count: 0, witnesses: Vec::new() }
                }
            }
        })
        .collect()
}

pub fn entropy_lower(op: &ColumnOperator, n: usize, cfg: &EstimatorConfig) -> LowerEstimate {
    entropy_lower_all(op, n, cfg).pop().unwrap()
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyEstimate {
    pub n: usize,
    pub upper: f64,
    pub lower: f64,
    pub method_upper: UpperMethod,
    pub method_lower: LowerMethod,
}

/// Both bounds on a grid of `n`; rejects a grid point where they cross.
pub fn estimate(op: &ColumnOperator, n_grid: &[usize], cfg: &EstimatorConfig) -> Result<Vec<EntropyEstimate>> {
    let max_n = n_grid.iter().copied().max().unwrap_or(1);
    if n_grid.contains(&0) {
        return Err(Error::InvalidParameter("entropy indices start at 1".into()));
    }
    let ups = entropy_upper_all(op, max_n, cfg);
    let lows = entropy_lower_all(op, max_n, cfg);
    n_grid
        .iter()
        .map(|&n| {
            let (u, l) = (&ups[n - 1], &lows[n - 1]);
            if l.value > u.value {
                return Err(Error::InvalidParameter(format!(
                    "{}: lower bound {} exceeds upper bound {} at n = {n}",
                    op.label, l.value, u.value
                )));
            }
            Ok(EntropyEstimate { n, upper: u.value, lower: l.value, method_upper: u.method, method_lower: l.method })
        })
        .collect()
}

/// Index and value of the combined bound `e_{k+M}(V) ≤ e_k + error` with
/// `M = ⌊log₂ #Γ⌋ + 1`.
pub fn combine_appr_v(base_upper: f64, approx_error: f64, family_size: u128, k: usize) -> (usize, f64) {
    assert!(family_size >= 1);
    let m = (127 - family_size.leading_zeros()) as usize + 1;
    (k + m, base_upper + approx_error)
}

/// `f(n, N, q) = 2^{-max(n/N, 1)} · min{1, [max(ln(N/n + 1)/n, 1/N)]^{1-1/q}}`.
pub fn dimension_bound_f(n: usize, dim: usize, q: f64) -> f64 {
    let (n, nn) = (n as f64, dim as f64);
    let inner = ((nn / n + 1.0).ln() / n).max(1.0 / nn);
    2f64.powf(-(n / nn).max(1.0)) * inner.powf(decay_exponent(q)).min(1.0)
}

/// Least-squares slope of `log₂ y` against `log₂ x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.log2(), p.1.log2())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub w_lower: f64,
    pub w_upper: f64,
    pub v_lower: f64,
    pub v_upper: f64,
    /// `2·e_n(W)`, the reduction bound for `e_n(V)`.
    pub v_upper_via_w: f64,
    pub method_lower: LowerMethod,
    pub method_upper: UpperMethod,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub rows: Vec<ReportRow>,
    /// Fitted `log₂ u_n` against `log₂ n` for the upper bounds of `W`.
    pub slope: Option<f64>,
}

pub fn entropy_report(wt: &WeightedTree, n_grid: &[usize], cfg: &EstimatorConfig) -> Result<EntropyReport> {
    let lp = LevelPartition::new(wt);
    let w = estimate(&ColumnOperator::from_w(&lp), n_grid, cfg)?;
    let v = estimate(&ColumnOperator::from_v(wt), n_grid, cfg)?;
    let rows: Vec<ReportRow> = w
        .iter()
        .zip(&v)
        .map(|(w, v)| ReportRow {
            n: w.n,
            w_lower: w.lower,
            w_upper: w.upper,
            v_lower: v.lower,
            v_upper: v.upper.min(2.0 * w.upper),
            v_upper_via_w: 2.0 * w.upper,
            method_lower: w.method_lower,
            method_upper: w.method_upper,
        })
        .collect();
    let slope = loglog_slope(&rows.iter().map(|r| (r.n as f64, r.w_upper)).collect::<Vec<_>>());
    Ok(EntropyReport { rows, slope })
}

/// The light-partition pipeline on sampled measures: for each `n`,
/// `max_𝔏 e_n(W_𝔏)` over the sampled partitions plus the `W⁴` bound,
/// at index `n + M` with `#𝕃_n ≤ (8e)^n`. Sampling covers only part of
/// `𝕃_n`, so the result is not a certified bound on `e_{n+M}(W)`.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineRow {
    pub n: usize,
    pub index: usize,
    pub base: f64,
    pub error: f64,
    pub value: f64,
    pub partitions_sampled: usize,
    pub certified: bool,
}

pub fn pipeline_bounds(
    lp: &LevelPartition,
    lights: &[(usize, LightPartition)],
    n_grid: &[usize],
    cfg: &EstimatorConfig,
) -> Vec<PipelineRow> {
    n_grid
        .iter()
        .map(|&n| {
            let mut seen: HashSet<Vec<usize>> = HashSet::new();
            let mut base: f64 = 0.0;
            for (_, l) in lights.iter().filter(|(m, _)| *m == n) {
                if seen.insert(l.lights.iter().map(|x| x.domain).collect()) {
                    let op = ColumnOperator::from_light(lp, l);
                    base = base.max(entropy_upper(&op, n, cfg).value);
                }
            }
            let family_log2 = n as f64 * (8.0 * std::f64::consts::E).log2();
            let m = family_log2.floor() as usize + 1;
            let error = crate::decomposition::w4_bound(n, lp.q());
            PipelineRow {
                n,
                index: n + m,
                base,
                error,
                value: base + error,
                partitions_sampled: seen.len(),
                certified: false,
            }
        })
        .collect()
}

/// Node ids of the columns of `W_𝔏` (the light roots).
pub fn light_roots(light: &LightPartition) -> Vec<NodeId> {
    light.lights.iter().map(|l| l.root).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn lattice_counts() {
        // N = 1: the integers -k..=k.
        assert!(close(lattice_log2_count(1, 3), 7f64.log2(), 1e-12));
        // N = 2, k = 1: origin and ±e_1, ±e_2.
        assert!(close(lattice_log2_count(2, 1), 5f64.log2(), 1e-12));
        let g = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        assert_eq!(lattice_points(&g, 2).len(), 13);
    }

    #[test]
    fn single_column_is_exact() {
        let op = ColumnOperator::from_dense(&[vec![3.0, 4.0]], 2.0, "v").unwrap();
        let cfg = EstimatorConfig::default();
        for n in 1..=10 {
            let exact = 5.0 * 0.5f64.powi(n as i32 - 1);
            let u = entropy_upper(&op, n, &cfg);
            let l = entropy_lower(&op, n, &cfg);
            assert_eq!(u.method, UpperMethod::Segment);
            assert!(u.value / exact >= 1.0 && u.value / exact <= 1.05);
            assert!(l.value / exact >= 0.95 && l.value / exact <= 1.0);
        }
    }

    #[test]
    fn zero_operator() {
        let op = ColumnOperator::from_dense(&[vec![0.0, 0.0], vec![0.0, 0.0]], 2.0, "0").unwrap();
        let cfg = EstimatorConfig::default();
        assert_eq!(entropy_upper(&op, 3, &cfg).value, 0.0);
        assert_eq!(entropy_lower(&op, 3, &cfg).value, 0.0);
    }

    #[test]
    fn cross_polytope_first_number() {
        let op = ColumnOperator::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2.0, "I").unwrap();
        let cfg = EstimatorConfig::default();
        assert!(entropy_upper(&op, 1, &cfg).value <= 1.0);
        let l = entropy_lower(&op, 1, &cfg);
        assert!(l.value > 0.0 && l.value <= 1.0);
    }

    #[test]
    fn identical_columns_do_not_change_bounds() {
        let cfg = EstimatorConfig::default();
        let one = ColumnOperator::from_dense(&[vec![1.0, 2.0]], 2.0, "a").unwrap();
        let many = ColumnOperator::from_dense(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![-1.0, -2.0]], 2.0, "b").unwrap();
        for n in 1..6 {
            assert_eq!(entropy_lower(&one, n, &cfg).value, entropy_lower(&many, n, &cfg).value);
            assert_eq!(entropy_upper(&one, n, &cfg).value, entropy_upper(&many, n, &cfg).value);
        }
    }

    #[test]
    fn combine_indices() {
        assert_eq!(combine_appr_v(1.0, 0.5, 1, 3), (4, 1.5));
        assert_eq!(combine_appr_v(1.0, 0.5, 8, 3).0, 7);
        assert_eq!(combine_appr_v(1.0, 0.5, 7, 3).0, 6);
    }

    #[test]
    fn dimension_bound() {
        for nn in [1usize, 3, 10, 40] {
            let f = dimension_bound_f(nn, nn, 2.0);
            assert!(close(f, 0.5 / (nn as f64).sqrt(), 1e-12));
            let f2 = dimension_bound_f(2 * nn, nn, 2.0);
            assert!(close(f2, 0.25 / (nn as f64).sqrt(), 1e-12));
        }
        for n in 1..10 {
            assert!(close(dimension_bound_f(n, 1, 1.5), 0.5f64.powi(n as i32), 1e-12));
        }
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (2f64.powi(i), 2f64.powi(-i) * 3.0)).collect();
        assert!(close(loglog_slope(&pts).unwrap(), -1.0, 1e-12));
        assert_eq!(loglog_slope(&pts[..1]), None);
    }

    #[test]
    fn distances() {
        let a = vec![(0, 1.0), (2, 2.0)];
        let b = vec![(1, 1.0), (2, 1.0)];
        assert!(close(lq_distance(&a, &b, 2.0), 3f64.sqrt(), 1e-15));
        assert_eq!(lq_distance(&a, &a, 1.5), 0.0);
    }
}
