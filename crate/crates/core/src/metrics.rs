//! The branch metric `d`, its extension to incomparable pairs and the
//! localized distance `d_𝕀`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{NodeId, RootedTree};
use crate::weights::{LevelPartition, WeightedTree};

/// Which distance an order net is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// The branch metric `d`.
    D,
    /// The localized distance `d_𝕀`.
    Localized,
}

#[derive(Debug, Clone)]
pub struct DistanceContext {
    lp: LevelPartition,
    /// Weight used by `d`: `σ̂` for the reduced metric, `σ` for the raw one.
    sigma: Vec<f64>,
    alpha_q: Vec<f64>,
    prefix: Vec<f64>,
}

impl DistanceContext {
    /// Distances of the dyadically reduced instance (`σ̂` in place of `σ`).
    pub fn new(wt: &WeightedTree) -> Self {
        let lp = LevelPartition::new(wt);
        let sigma = lp.sigma_hat().to_vec();
        Self::build(lp, sigma)
    }

    /// `d` evaluated with the original `σ`; `d_𝕀` still uses `σ̂`.
    pub fn raw(wt: &WeightedTree) -> Self {
        Self::build(LevelPartition::new(wt), wt.sigma().to_vec())
    }

    pub fn from_levels(lp: LevelPartition) -> Self {
        let sigma = lp.sigma_hat().to_vec();
        Self::build(lp, sigma)
    }

    fn build(lp: LevelPartition, sigma: Vec<f64>) -> Self {
        let q = lp.q();
        let alpha_q: Vec<f64> = lp.alpha().iter().map(|a| a.powf(q)).collect();
        let tree = lp.tree();
        let mut prefix = vec![0.0; tree.len()];
        for &v in tree.preorder() {
            prefix[v] = tree.parent(v).map_or(0.0, |p| prefix[p]) + alpha_q[v];
        }
        Self { lp, sigma, alpha_q, prefix }
    }

    pub fn levels(&self) -> &LevelPartition {
        &self.lp
    }

    pub fn tree(&self) -> &RootedTree {
        self.lp.tree()
    }

    pub fn q(&self) -> f64 {
        self.lp.q()
    }

    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }

    /// `α(v)^q`.
    pub fn alpha_q(&self, v: NodeId) -> f64 {
        self.alpha_q[v]
    }

    /// `Σ_{u ⪯ v} α(u)^q`.
    pub fn prefix_sum(&self, v: NodeId) -> f64 {
        self.prefix[v]
    }

    /// The weight `d` is built from.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn equiv(&self, t: NodeId, s: NodeId) -> bool {
        self.lp.equiv(t, s)
    }

    /// `d(t, s) = max_{v ∈ (t, s]} (Σ_{τ ∈ (t, v]} α(τ)^q)^{1/q} σ(v)` for `t ⪯ s`.
    pub fn order_distance(&self, t: NodeId, s: NodeId) -> Result<f64> {
        if !self.tree().precedes(t, s) {
            return Err(Error::NotComparable(t, s));
        }
        Ok(self.order_distance_unchecked(t, s))
    }

    pub(crate) fn order_distance_unchecked(&self, t: NodeId, s: NodeId) -> f64 {
        let tree = self.tree();
        let mut path: Vec<NodeId> = tree.ancestors(s).take_while(|&v| v != t).collect();
        path.reverse();
        let inv_q = 1.0 / self.q();
        let mut sum = 0.0;
        let mut best: f64 = 0.0;
        for v in path {
            sum += self.alpha_q[v];
            best = best.max(sum.powf(inv_q) * self.sigma[v]);
        }
        best
    }

    /// `d` on comparable pairs; `max(d(w, t), d(w, s))` with `w` the greatest
    /// common ancestor otherwise.
    pub fn full_distance(&self, t: NodeId, s: NodeId) -> f64 {
        let tree = self.tree();
        if tree.precedes(t, s) {
            self.order_distance_unchecked(t, s)
        } else if tree.precedes(s, t) {
            self.order_distance_unchecked(s, t)
        } else {
            let w = tree.gca(t, s);
            self.order_distance_unchecked(w, t).max(self.order_distance_unchecked(w, s))
        }
    }

    /// `d_𝕀(t, s) = σ̂(s) (Σ_{v ∈ (t, s], v ≡ s} α(v)^q)^{1/q}` for `t ⪯ s`,
    /// `+∞` otherwise.
    pub fn localized_distance(&self, t: NodeId, s: NodeId) -> f64 {
        if !self.tree().precedes(t, s) {
            return f64::INFINITY;
        }
        // Levels never decrease downwards, so the equivalent part of (t, s]
        // is the tail that starts at max(λ(s), t⁺).
        let tree = self.tree();
        let mut sum = 0.0;
        for v in tree.ancestors(s) {
            if v == t || !self.lp.equiv(v, s) {
                break;
            }
            sum += self.alpha_q[v];
        }
        self.lp.sigma_hat()[s] * sum.powf(1.0 / self.q())
    }

    /// `d_𝕀` through `d`: `min(d(λ(s)⁻, s), d(t, s))` when `λ(s)` has a
    /// parent, `d(t, s)` otherwise. Only meaningful on the reduced context.
    pub fn localized_distance_min_form(&self, t: NodeId, s: NodeId) -> f64 {
        let tree = self.tree();
        if !tree.precedes(t, s) {
            return f64::INFINITY;
        }
        let direct = self.order_distance_unchecked(t, s);
        match tree.parent(self.lp.lambda(s)) {
            Some(top) => direct.min(self.order_distance_unchecked(top, s)),
            None => direct,
        }
    }

    pub fn distance(&self, metric: Metric, t: NodeId, s: NodeId) -> f64 {
        match metric {
            Metric::D => {
                if self.tree().precedes(t, s) {
                    self.order_distance_unchecked(t, s)
                } else {
                    f64::INFINITY
                }
            }
            Metric::Localized => self.localized_distance(t, s),
        }
    }

    /// The highest ancestor `a` of `t` with `dist(a, t) < eps`. Every `s` on
    /// `[a, t]` also satisfies it, since both distances shrink as the upper
    /// endpoint moves down.
    pub fn cover_top(&self, metric: Metric, t: NodeId, eps: f64) -> NodeId {
        let tree = self.tree();
        let mut top = t;
        match metric {
            Metric::D => {
                for s in tree.ancestors(t).skip(1) {
                    if self.order_distance_unchecked(s, t) < eps {
                        top = s;
                    } else {
                        break;
                    }
                }
            }
            Metric::Localized => {
                // Same summation order as `localized_distance`.
                let inv_q = 1.0 / self.q();
                let scale = self.lp.sigma_hat()[t];
                let mut sum = 0.0;
                let mut same_level = true;
                let mut prev = t;
                for s in tree.ancestors(t).skip(1) {
                    if same_level && self.lp.equiv(prev, t) {
                        sum += self.alpha_q[prev];
                    } else {
                        same_level = false;
                    }
                    if scale * sum.powf(inv_q) < eps {
                        top = s;
                    } else {
                        break;
                    }
                    prev = s;
                }
            }
        }
        top
    }

    /// `sup_s d(ρ, s)`, the radius of `T` around the root.
    pub fn root_radius(&self) -> f64 {
        let root = self.tree().root();
        (0..self.len()).map(|s| self.order_distance_unchecked(root, s)).fold(0.0, f64::max)
    }

    /// All pairwise `full_distance` values, row-major.
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|t| (0..n).map(|s| if t == s { 0.0 } else { self.full_distance(t, s) }).collect()).collect()
    }
}
