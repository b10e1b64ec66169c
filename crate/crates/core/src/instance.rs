//! Instance generators.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{NodeId, RootedTree};
use crate::weights::{SparseVector, WeightedTree};

/// Largest out-degree produced by the random shape.
pub const RANDOM_MAX_CHILDREN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Shape {
    /// Complete binary tree; depth 0 is a single node.
    Binary {
        depth: usize,
    },
    Chain {
        len: usize,
    },
    /// Uniform attachment with out-degree at most three.
    Random {
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `σ ≡ 1`, `α(t) = (|t|+1)^{-1}`.
    Corollary,
    /// `σ ≡ 1`, `α ≡ 1`.
    Constant,
    /// `α` uniform on `[0.2, 1)`; `σ` shrinks by a random factor on 40% of
    /// the edges so that several dyadic levels appear.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub shape: Shape,
    pub profile: Profile,
    pub q: f64,
    pub seed: u64,
}

impl InstanceSpec {
    pub fn corollary(depth: usize) -> Self {
        Self { shape: Shape::Binary { depth }, profile: Profile::Corollary, q: 2.0, seed: 0 }
    }

    pub fn random(len: usize, seed: u64) -> Self {
        Self { shape: Shape::Random { len }, profile: Profile::Random, q: 2.0, seed }
    }
}

pub fn generate_tree(shape: Shape, rng: &mut impl Rng) -> Result<RootedTree> {
    let parents: Vec<Option<NodeId>> = match shape {
        Shape::Binary { depth } => {
            if depth >= 30 {
                return Err(Error::InvalidParameter(format!("binary depth {depth} is too large")));
            }
            let n = (1usize << (depth + 1)) - 1;
            (0..n).map(|i| i.checked_sub(1).map(|j| j / 2)).collect()
        }
        Shape::Chain { len } | Shape::Random { len } if len == 0 => {
            return Err(Error::InvalidParameter("a tree needs at least one node".into()));
        }
        Shape::Chain { len } => (0..len).map(|i| i.checked_sub(1)).collect(),
        Shape::Random { len } => {
            let mut parents = vec![None];
            let mut open: Vec<NodeId> = vec![0];
            let mut degree = vec![0usize];
            for v in 1..len {
                let k = rng.gen_range(0..open.len());
                let p = open[k];
                parents.push(Some(p));
                degree[p] += 1;
                if degree[p] == RANDOM_MAX_CHILDREN {
                    open.swap_remove(k);
                }
                open.push(v);
                degree.push(0);
            }
            parents
        }
    };
    RootedTree::from_parent_indices(&parents)
}

pub fn generate(spec: &InstanceSpec) -> Result<WeightedTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tree = generate_tree(spec.shape, &mut rng)?;
    let n = tree.len();
    let (alpha, sigma) = match spec.profile {
        Profile::Corollary => ((0..n).map(|v| 1.0 / (tree.depth(v) as f64 + 1.0)).collect(), vec![1.0; n]),
        Profile::Constant => (vec![1.0; n], vec![1.0; n]),
        Profile::Random => {
            let alpha = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
            let mut sigma = vec![1.0; n];
            for &v in tree.preorder() {
                if let Some(p) = tree.parent(v) {
                    let f = if rng.gen_bool(0.6) { 1.0 } else { rng.gen_range(0.3..1.0) };
                    sigma[v] = sigma[p] * f;
                }
            }
            (alpha, sigma)
        }
    };
    WeightedTree::new(Arc::new(tree), alpha, sigma, spec.q)
}

/// A random element of the `ℓ₁` unit ball: up to `max_support` nodes with
/// signed uniform entries, rescaled to a norm drawn from `(0.5, 1]`.
pub fn random_measure(len: usize, max_support: usize, rng: &mut impl Rng) -> SparseVector {
    let k = rng.gen_range(1..=max_support.clamp(1, len));
    let nodes = rand::seq::index::sample(rng, len, k);
    let raw: Vec<(NodeId, f64)> = nodes.iter().map(|t| (t, rng.gen_range(-1.0..1.0))).collect();
    let total: f64 = raw.iter().map(|(_, x)| x.abs()).sum();
    if total == 0.0 {
        return SparseVector::delta(raw[0].0);
    }
    let target = 1.0 - rng.gen_range(0.0..0.5);
    let mut mu = SparseVector::from_pairs(raw.into_iter().map(|(t, x)| (t, x * target / total)));
    while mu.l1_norm() > 1.0 {
        mu = mu.scaled(1.0 - 1e-15);
    }
    mu
}
