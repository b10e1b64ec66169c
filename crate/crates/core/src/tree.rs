//! Finite rooted trees with the ancestor order.
//!
//! Nodes are addressed by dense indices `0..len()` assigned in input order.
//! The external labels read from files are kept alongside so reports can
//! refer back to them. Traversal order is pre-order from the root with
//! children visited in input order; subtrees are therefore contiguous
//! slices of [`RootedTree::preorder`].

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Whether an order interval keeps its lower endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Interval {
    /// `[t, s]`
    Closed,
    /// `(t, s]`
    LeftOpen,
}

#[derive(Debug, Clone)]
pub struct RootedTree {
    labels: Vec<u64>,
    index_of: HashMap<u64, NodeId>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
    preorder: Vec<NodeId>,
    position: Vec<usize>,
    subtree_len: Vec<usize>,
    root: NodeId,
}

impl RootedTree {
    /// Builds a tree from `(label, parent label)` pairs. Exactly one entry
    /// must have no parent.
    pub fn from_parents(entries: &[(u64, Option<u64>)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::MalformedTree("no nodes".into()));
        }
        let mut index_of = HashMap::with_capacity(entries.len());
        for (i, &(label, _)) in entries.iter().enumerate() {
            if index_of.insert(label, i).is_some() {
                return Err(Error::MalformedTree(format!("duplicate node id {label}")));
            }
        }
        let mut parent = Vec::with_capacity(entries.len());
        for &(label, p) in entries {
            match p {
                None => parent.push(None),
                Some(p) => {
                    let pi = *index_of
                        .get(&p)
                        .ok_or_else(|| Error::MalformedTree(format!("node {label} has unknown parent {p}")))?;
                    parent.push(Some(pi));
                }
            }
        }
        let labels = entries.iter().map(|e| e.0).collect();
        Self::assemble(labels, index_of, parent)
    }

    /// Builds a tree whose labels coincide with the dense indices.
    pub fn from_parent_indices(parents: &[Option<NodeId>]) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::MalformedTree("no nodes".into()));
        }
        if let Some(bad) = parents.iter().flatten().find(|&&p| p >= n) {
            return Err(Error::MalformedTree(format!("parent index {bad} out of range")));
        }
        let labels: Vec<u64> = (0..n as u64).collect();
        let index_of = (0..n).map(|i| (i as u64, i)).collect();
        Self::assemble(labels, index_of, parents.to_vec())
    }

    fn assemble(labels: Vec<u64>, index_of: HashMap<u64, NodeId>, parent: Vec<Option<NodeId>>) -> Result<Self> {
        let n = parent.len();
        let roots: Vec<NodeId> = (0..n).filter(|&i| parent[i].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(Error::MalformedTree("no root (every node has a parent)".into())),
            _ => {
                return Err(Error::MalformedTree(format!(
                    "{} roots: {:?}",
                    roots.len(),
                    roots.iter().map(|&r| labels[r]).collect::<Vec<_>>()
                )))
            }
        };
        let mut children = vec![Vec::new(); n];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                children[p].push(i);
            }
        }

        let mut depth = vec![0usize; n];
        let mut preorder = Vec::with_capacity(n);
        let mut stack = vec![root];
        let mut seen = vec![false; n];
        while let Some(v) = stack.pop() {
            if seen[v] {
                return Err(Error::MalformedTree(format!("cycle through node {}", labels[v])));
            }
            seen[v] = true;
            preorder.push(v);
            for &c in children[v].iter().rev() {
                depth[c] = depth[v] + 1;
                stack.push(c);
            }
        }
        if preorder.len() != n {
            let stray = (0..n).find(|&i| !seen[i]).unwrap();
            return Err(Error::MalformedTree(format!("node {} is not reachable from the root (cycle)", labels[stray])));
        }

        let mut position = vec![0usize; n];
        for (i, &v) in preorder.iter().enumerate() {
            position[v] = i;
        }
        let mut subtree_len = vec![1usize; n];
        for &v in preorder.iter().rev() {
            if let Some(p) = parent[v] {
                subtree_len[p] += subtree_len[v];
            }
        }

        Ok(Self { labels, index_of, parent, children, depth, preorder, position, subtree_len, root })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v]
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.children[v]
    }

    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v]
    }

    /// Resolves an external label to its dense index.
    pub fn node(&self, label: u64) -> Result<NodeId> {
        self.index_of.get(&label).copied().ok_or(Error::UnknownNode(label))
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if v < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v as u64))
        }
    }

    /// Number of strict predecessors of `v`.
    #[inline]
    pub fn depth(&self, v: NodeId) -> usize {
        self.depth[v]
    }

    pub fn order_of(&self, v: NodeId) -> Result<usize> {
        self.check(v)?;
        Ok(self.depth[v])
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// `t ⪯ s`: `t` lies on the path from the root to `s` (inclusive).
    #[inline]
    pub fn precedes(&self, t: NodeId, s: NodeId) -> bool {
        let (pt, ps) = (self.position[t], self.position[s]);
        pt <= ps && ps < pt + self.subtree_len[t]
    }

    pub fn is_ancestor(&self, t: NodeId, s: NodeId) -> Result<bool> {
        self.check(t)?;
        self.check(s)?;
        Ok(self.precedes(t, s))
    }

    /// Nodes of `[t, s]` (or `(t, s]`) listed from the root side.
    pub fn order_interval(&self, t: NodeId, s: NodeId, kind: Interval) -> Result<Vec<NodeId>> {
        self.check(t)?;
        self.check(s)?;
        if !self.precedes(t, s) {
            return Err(Error::NotComparable(t, s));
        }
        let mut out = Vec::with_capacity(self.depth[s] - self.depth[t] + 1);
        let mut v = s;
        while v != t {
            out.push(v);
            v = self.parent[v].expect("t precedes s");
        }
        if kind == Interval::Closed {
            out.push(t);
        }
        out.reverse();
        Ok(out)
    }

    /// Iterates `s, s⁻, s⁻⁻, …, ρ`.
    pub fn ancestors(&self, s: NodeId) -> Ancestors<'_> {
        Ancestors { tree: self, next: Some(s) }
    }

    /// The ancestor of `s` at the given depth (`depth <= depth(s)`).
    pub fn ancestor_at(&self, s: NodeId, depth: usize) -> NodeId {
        let mut v = s;
        while self.depth[v] > depth {
            v = self.parent[v].unwrap();
        }
        v
    }

    /// Greatest common ancestor.
    pub fn gca(&self, a: NodeId, b: NodeId) -> NodeId {
        let (mut a, mut b) = (a, b);
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Root-first traversal order.
    pub fn preorder(&self) -> &[NodeId] {
        &self.preorder
    }

    /// The subtree rooted at `v` as a slice of the pre-order.
    pub fn subtree(&self, v: NodeId) -> &[NodeId] {
        let p = self.position[v];
        &self.preorder[p..p + self.subtree_len[v]]
    }

    pub fn subtree_len(&self, v: NodeId) -> usize {
        self.subtree_len[v]
    }

    /// `(label, parent label)` pairs in index order.
    pub fn parent_list(&self) -> Vec<(u64, Option<u64>)> {
        (0..self.len()).map(|v| (self.labels[v], self.parent[v].map(|p| self.labels[p]))).collect()
    }
}

pub struct Ancestors<'a> {
    tree: &'a RootedTree,
    next: Option<NodeId>,
}

impl Iterator for Ancestors<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let v = self.next?;
        self.next = self.tree.parent[v];
        Some(v)
    }
}
