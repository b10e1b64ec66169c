//! Covering numbers, order nets, partition trees and entropy bounds for
//! weighted summation operators on finite rooted trees.

pub mod decomposition;
pub mod entropy;
pub mod error;
pub mod instance;
pub mod io;
pub mod metrics;
pub mod nets;
pub mod partitions;
pub mod setcover;
pub mod tree;
pub mod verify;
pub mod weights;

pub use error::{Error, Result};
pub use tree::{Interval, NodeId, RootedTree};
pub use weights::{LevelPartition, SparseVector, WeightedTree};

/// Relative tolerance for inequality checks that certify bounds.
pub const REL_SLACK: f64 = 1e-9;

/// `a ≤ b` up to [`REL_SLACK`] relative to the larger magnitude.
pub fn le_with_slack(a: f64, b: f64) -> bool {
    a <= b + REL_SLACK * a.abs().max(b.abs())
}
