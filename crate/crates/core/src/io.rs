//! Plain-text tree, weight and measure files.
//!
//! Tree: one `<id> <parent|->` per line. Weights: one `<id> <alpha> <sigma>`
//! per line, every node exactly once. Measures: one `<id> <value>` per line.
//! Blank lines and `#` comments are ignored.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::RootedTree;
use crate::weights::{SparseVector, WeightedTree};

fn records(text: &str, fields: usize) -> impl Iterator<Item = Result<(usize, Vec<&str>)>> {
    text.lines().enumerate().filter_map(move |(i, line)| {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            return None;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != fields {
            return Some(Err(Error::MalformedInput(format!(
                "line {}: expected {fields} fields, found {}",
                i + 1,
                parts.len()
            ))));
        }
        Some(Ok((i + 1, parts)))
    })
}

fn parse<T: std::str::FromStr>(line: usize, what: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::MalformedInput(format!("line {line}: bad {what} `{s}`")))
}

pub fn parse_tree(text: &str) -> Result<RootedTree> {
    let mut entries = Vec::new();
    for rec in records(text, 2) {
        let (line, p) = rec?;
        let id: u64 = parse(line, "node id", p[0])?;
        let parent = if p[1] == "-" { None } else { Some(parse(line, "parent id", p[1])?) };
        entries.push((id, parent));
    }
    if entries.is_empty() {
        return Err(Error::MalformedInput("tree file has no nodes".into()));
    }
    RootedTree::from_parents(&entries)
}

pub fn parse_weights(text: &str, tree: Arc<RootedTree>, q: f64) -> Result<WeightedTree> {
    let n = tree.len();
    let mut alpha = vec![f64::NAN; n];
    let mut sigma = vec![f64::NAN; n];
    for rec in records(text, 3) {
        let (line, p) = rec?;
        let id: u64 = parse(line, "node id", p[0])?;
        let v = tree.node(id).map_err(|_| Error::MalformedInput(format!("line {line}: unknown node {id}")))?;
        if !alpha[v].is_nan() {
            return Err(Error::MalformedInput(format!("line {line}: node {id} listed twice")));
        }
        alpha[v] = parse(line, "alpha", p[1])?;
        sigma[v] = parse(line, "sigma", p[2])?;
    }
    if let Some(v) = alpha.iter().position(|a| a.is_nan()) {
        return Err(Error::MalformedInput(format!("no weights for node {}", tree.label(v))));
    }
    WeightedTree::new(tree, alpha, sigma, q)
}

pub fn parse_measure(text: &str, tree: &RootedTree) -> Result<SparseVector> {
    let mut pairs = Vec::new();
    for rec in records(text, 2) {
        let (line, p) = rec?;
        let id: u64 = parse(line, "node id", p[0])?;
        let v = tree.node(id).map_err(|_| Error::MalformedInput(format!("line {line}: unknown node {id}")))?;
        let x: f64 = parse(line, "value", p[1])?;
        if !x.is_finite() {
            return Err(Error::MalformedInput(format!("line {line}: value must be finite")));
        }
        pairs.push((v, x));
    }
    Ok(SparseVector::from_pairs(pairs))
}

pub fn format_tree(tree: &RootedTree) -> String {
    let mut out = String::new();
    for (id, parent) in tree.parent_list() {
        match parent {
            Some(p) => writeln!(out, "{id} {p}"),
            None => writeln!(out, "{id} -"),
        }
        .unwrap();
    }
    out
}

/// Weights with round-trip float formatting.
pub fn format_weights(wt: &WeightedTree) -> String {
    let tree = wt.tree();
    let mut out = String::new();
    for v in 0..wt.len() {
        writeln!(out, "{} {:?} {:?}", tree.label(v), wt.alpha()[v], wt.sigma()[v]).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, InstanceSpec};

    #[test]
    fn round_trip() {
        let wt = generate(&InstanceSpec::random(30, 7)).unwrap();
        let tree = Arc::new(parse_tree(&format_tree(wt.tree())).unwrap());
        assert_eq!(tree.parent_list(), wt.tree().parent_list());
        let back = parse_weights(&format_weights(&wt), tree, 2.0).unwrap();
        assert_eq!(back.alpha(), wt.alpha());
        assert_eq!(back.sigma(), wt.sigma());
    }

    #[test]
    fn comments_and_labels() {
        let t = parse_tree("# chain\n10 -\n\n20 10 # child\n").unwrap();
        assert_eq!(t.len(), 2);
        let mu = parse_measure("20 -0.5\n", &t).unwrap();
        assert_eq!(mu.get(t.node(20).unwrap()), -0.5);
    }

    #[test]
    fn malformed() {
        for bad in ["", "1", "1 - 3", "x -", "1 y", "1 -\n2 1\n2 1"] {
            assert!(parse_tree(bad).is_err(), "{bad:?}");
        }
        let t = Arc::new(parse_tree("1 -\n2 1").unwrap());
        for bad in ["1 1 1", "1 1 1\n2 1 1\n2 1 1", "1 1 1\n3 1 1", "1 a 1\n2 1 1"] {
            assert!(matches!(parse_weights(bad, t.clone(), 2.0), Err(Error::MalformedInput(_))), "{bad:?}");
        }
        assert!(matches!(parse_measure("1 inf", &t), Err(Error::MalformedInput(_))));
    }

    #[test]
    fn increasing_sigma_is_rejected() {
        let t = Arc::new(parse_tree("1 -\n2 1").unwrap());
        assert!(matches!(parse_weights("1 1 0.5\n2 1 1", t, 2.0), Err(Error::SigmaIncreasing { .. })));
    }
}
