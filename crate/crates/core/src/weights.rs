//! Weighted trees, the summation operator `V`, its dyadic reduction and the
//! localized operator `W`.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{NodeId, RootedTree};

/// `1 - 1/q`, the reciprocal of the conjugate exponent.
#[inline]
pub fn decay_exponent(q: f64) -> f64 {
    1.0 - 1.0 / q
}

#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

/// A finitely supported element of `ℓ₁(T)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: BTreeMap<NodeId, f64>,
}

impl SparseVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Unit vector `δ_s`.
    pub fn delta(s: NodeId) -> Self {
        Self::from_pairs([(s, 1.0)])
    }

    /// Zero entries are dropped; repeated nodes are summed.
    pub fn from_pairs<I: IntoIterator<Item = (NodeId, f64)>>(pairs: I) -> Self {
        let mut entries = BTreeMap::new();
        for (s, x) in pairs {
            *entries.entry(s).or_insert(0.0) += x;
        }
        entries.retain(|_, x| *x != 0.0);
        Self { entries }
    }

    pub fn from_dense(values: &[f64]) -> Self {
        Self::from_pairs(values.iter().copied().enumerate())
    }

    pub fn get(&self, s: NodeId) -> f64 {
        self.entries.get(&s).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.entries.iter().map(|(&s, &x)| (s, x))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|x| x.abs()).sum()
    }

    pub fn max_node(&self) -> Option<NodeId> {
        self.entries.keys().next_back().copied()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_pairs(self.iter().map(|(s, x)| (s, a * x)))
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        Self::from_pairs(self.iter().map(|(s, x)| (s, a * x)).chain(other.iter().map(|(s, x)| (s, b * x))))
    }

    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        for (s, x) in self.iter() {
            out[s] = x;
        }
        out
    }
}

/// `(Σ|v(t)|^q)^{1/q}`, summed in index order.
pub fn lq_norm(v: &[f64], q: f64) -> f64 {
    if q == 1.0 {
        return l1_norm(v);
    }
    let s: f64 = v.iter().map(|x| x.abs().powf(q)).sum();
    s.powf(1.0 / q)
}

pub fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// A rooted tree with weights `α`, `σ` and the target exponent `q ∈ (1, 2]`.
#[derive(Debug, Clone)]
pub struct WeightedTree {
    tree: Arc<RootedTree>,
    alpha: Vec<f64>,
    sigma: Vec<f64>,
    q: f64,
}

impl WeightedTree {
    /// Validates positivity, `q ∈ (1, 2]` and that `σ` does not increase
    /// along branches.
    pub fn new(tree: Arc<RootedTree>, alpha: Vec<f64>, sigma: Vec<f64>, q: f64) -> Result<Self> {
        if !(q > 1.0 && q <= 2.0) {
            return Err(Error::InvalidParameter(format!("q = {q} is outside (1, 2]")));
        }
        let n = tree.len();
        if alpha.len() != n || sigma.len() != n {
            return Err(Error::InvalidWeights(format!(
                "tree has {n} nodes but {} alpha and {} sigma values were given",
                alpha.len(),
                sigma.len()
            )));
        }
        for v in 0..n {
            let (a, s) = (alpha[v], sigma[v]);
            if !(a.is_finite() && a > 0.0 && s.is_finite() && s > 0.0) {
                return Err(Error::InvalidWeights(format!(
                    "node {}: alpha = {a}, sigma = {s} (both must be finite and positive)",
                    tree.label(v)
                )));
            }
        }
        for v in 0..n {
            if let Some(p) = tree.parent(v) {
                if sigma[v] > sigma[p] {
                    return Err(Error::SigmaIncreasing {
                        parent: tree.label(p),
                        child: tree.label(v),
                        parent_sigma: sigma[p],
                        child_sigma: sigma[v],
                    });
                }
            }
        }
        Ok(Self { tree, alpha, sigma, q })
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn shared_tree(&self) -> Arc<RootedTree> {
        Arc::clone(&self.tree)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// Same tree and `α`, different `σ`.
    pub fn with_sigma(&self, sigma: Vec<f64>) -> Result<Self> {
        Self::new(Arc::clone(&self.tree), self.alpha.clone(), sigma, self.q)
    }

    /// `Σ_{u ⪯ v} α(u)^q` for every `v`.
    pub fn alpha_prefix(&self) -> Vec<f64> {
        let mut prefix = vec![0.0; self.len()];
        for &v in self.tree.preorder() {
            let up = self.tree.parent(v).map_or(0.0, |p| prefix[p]);
            prefix[v] = up + self.alpha[v].powf(self.q);
        }
        prefix
    }

    /// The norm bound `κ = max_v (Σ_{u ⪯ v} α(u)^q)^{1/q} σ(v)`.
    pub fn kappa(&self) -> f64 {
        self.alpha_prefix().iter().zip(&self.sigma).map(|(p, s)| p.powf(1.0 / self.q) * s).fold(0.0, f64::max)
    }

    /// `(Vμ)(t) = α(t) Σ_{s ⪰ t} σ(s) μ(s)`.
    pub fn apply_v(&self, mu: &SparseVector) -> Vec<f64> {
        let mut acc = vec![0.0; self.len()];
        for (s, x) in mu.iter() {
            acc[s] += self.sigma[s] * x;
        }
        for &v in self.tree.preorder().iter().rev() {
            if let Some(p) = self.tree.parent(v) {
                acc[p] += acc[v];
            }
        }
        for (v, a) in acc.iter_mut().enumerate() {
            *a *= self.alpha[v];
        }
        acc
    }

    /// Column `Vδ_s` as `(t, value)` pairs along `[ρ, s]`, root first.
    pub fn column_v(&self, s: NodeId) -> Vec<(NodeId, f64)> {
        let mut col: Vec<(NodeId, f64)> = self.tree.ancestors(s).map(|t| (t, self.alpha[t] * self.sigma[s])).collect();
        col.reverse();
        col
    }

    /// Rescales `α` by `c0^{-(1-1/q)}` so that a covering hypothesis with
    /// constant `c0` becomes one with constant 1.
    pub fn normalize_c0(&self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 = {c0} must be positive")));
        }
        let f = c0.powf(-decay_exponent(self.q));
        let alpha = self.alpha.iter().map(|a| a * f).collect();
        Self::new(Arc::clone(&self.tree), alpha, self.sigma.clone(), self.q)
    }
}

/// The dyadic level sets `I_k = {t : 2^{-k-1} < σ(t) ≤ 2^{-k}}` and the
/// reduced weight `σ̂ = 2^{-k}` on `I_k`.
#[derive(Debug, Clone)]
pub struct LevelPartition {
    base: WeightedTree,
    level: Vec<i32>,
    sigma_hat: Vec<f64>,
    lambda: Vec<NodeId>,
}

/// The unique `k` with `2^{-k-1} < σ ≤ 2^{-k}`.
pub fn dyadic_level(sigma: f64) -> i32 {
    let mut k = (-sigma.log2()).floor() as i32;
    while pow2(-k) < sigma {
        k -= 1;
    }
    while pow2(-k - 1) >= sigma {
        k += 1;
    }
    k
}

impl LevelPartition {
    pub fn new(base: &WeightedTree) -> Self {
        let tree = base.tree();
        let level: Vec<i32> = base.sigma.iter().map(|&s| dyadic_level(s)).collect();
        let sigma_hat = level.iter().map(|&k| pow2(-k)).collect();
        let mut lambda = vec![0; tree.len()];
        for &v in tree.preorder() {
            lambda[v] = match tree.parent(v) {
                Some(p) if level[p] == level[v] => lambda[p],
                _ => v,
            };
        }
        Self { base: base.clone(), level, sigma_hat, lambda }
    }

    pub fn base(&self) -> &WeightedTree {
        &self.base
    }

    pub fn tree(&self) -> &RootedTree {
        self.base.tree()
    }

    pub fn q(&self) -> f64 {
        self.base.q
    }

    pub fn alpha(&self) -> &[f64] {
        &self.base.alpha
    }

    pub fn len(&self) -> usize {
        self.level.len()
    }

    pub fn is_empty(&self) -> bool {
        self.level.is_empty()
    }

    pub fn level(&self, t: NodeId) -> i32 {
        self.level[t]
    }

    pub fn levels(&self) -> &[i32] {
        &self.level
    }

    pub fn sigma_hat(&self) -> &[f64] {
        &self.sigma_hat
    }

    /// `t ≡ s`: same dyadic level set.
    #[inline]
    pub fn equiv(&self, t: NodeId, s: NodeId) -> bool {
        self.level[t] == self.level[s]
    }

    /// Minimal element of `I_k ∩ [ρ, s]` where `s ∈ I_k`.
    #[inline]
    pub fn lambda(&self, s: NodeId) -> NodeId {
        self.lambda[s]
    }

    /// Nonempty level sets as `(k, members)`, ascending in `k`.
    pub fn level_sets(&self) -> Vec<(i32, Vec<NodeId>)> {
        let mut sets: BTreeMap<i32, Vec<NodeId>> = BTreeMap::new();
        for &v in self.tree().preorder() {
            sets.entry(self.level[v]).or_default().push(v);
        }
        sets.into_iter().collect()
    }

    /// The weighted tree with `σ` replaced by `σ̂`.
    pub fn reduced_weights(&self) -> WeightedTree {
        WeightedTree {
            tree: self.base.shared_tree(),
            alpha: self.base.alpha.clone(),
            sigma: self.sigma_hat.clone(),
            q: self.base.q,
        }
    }

    /// `(Wμ)(t) = α(t) 2^{-k} Σ_{s ⪰ t, s ∈ I_k} μ(s)` for `t ∈ I_k`.
    pub fn apply_w(&self, mu: &SparseVector) -> Vec<f64> {
        let tree = self.tree();
        let mut acc = vec![0.0; self.len()];
        for (s, x) in mu.iter() {
            acc[s] += x;
        }
        // Equal levels at both ends of a path force equal levels in between,
        // so same-level descendants are reached through same-level children.
        for &v in tree.preorder().iter().rev() {
            if let Some(p) = tree.parent(v) {
                if self.level[p] == self.level[v] {
                    acc[p] += acc[v];
                }
            }
        }
        for (v, a) in acc.iter_mut().enumerate() {
            *a *= self.base.alpha[v] * self.sigma_hat[v];
        }
        acc
    }

    /// Column `Wδ_s`, supported on `[λ(s), s]`, root side first.
    pub fn column_w(&self, s: NodeId) -> Vec<(NodeId, f64)> {
        let lam = self.lambda[s];
        let mut col = Vec::new();
        for t in self.tree().ancestors(s) {
            col.push((t, self.base.alpha[t] * self.sigma_hat[s]));
            if t == lam {
                break;
            }
        }
        col.reverse();
        col
    }
}
