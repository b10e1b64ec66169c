use thiserror::Error;

use crate::tree::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("unknown node {0}")]
    UnknownNode(u64),

    #[error("nodes {0} and {1} are not comparable in the tree order")]
    NotComparable(NodeId, NodeId),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("sigma increases along the branch {parent} -> {child} ({parent_sigma} < {child_sigma})")]
    SigmaIncreasing { parent: u64, child: u64, parent_sigma: f64, child_sigma: f64 },

    #[error("exact solver limited to {limit} nodes, instance has {size}")]
    SizeLimit { size: usize, limit: usize },

    #[error(
        "level {level}: no order net of size <= {cap} exists at eps = {eps} (smallest augmentation has {needed} nodes)"
    )]
    InfeasibleNet { level: usize, eps: f64, cap: usize, needed: usize },

    #[error("measure is zero, the essential tree is undefined")]
    EmptyMeasure,

    #[error("measure has l1 norm {0} > 1")]
    MeasureTooLarge(f64),

    #[error("light partition was built for a different measure or n")]
    MismatchedPartition,

    #[error("partition tree has {available} levels, {needed} are required")]
    NotEnoughLevels { available: usize, needed: usize },

    #[error("malformed input: {0}")]
    MalformedInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
