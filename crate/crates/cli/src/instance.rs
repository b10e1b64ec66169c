use std::path::PathBuf;
use std::sync::Arc;

use arbor::instance::{generate, InstanceSpec, Profile, Shape};
use arbor::io::{parse_tree, parse_weights};
use arbor::WeightedTree;
use clap::{Args, ValueEnum};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ShapeArg {
    Binary,
    Chain,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    /// σ ≡ 1, α(t) = 1/(|t|+1)
    Corollary,
    /// σ ≡ 1, α ≡ 1
    Constant,
    /// random α, σ shrinking along branches
    Random,
}

/// A generated instance, or one read from `--tree` and `--weights`.
#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    /// Tree file, one `<id> <parent|->` per line
    #[arg(long, requires = "weights", value_name = "FILE")]
    pub tree: Option<PathBuf>,
    /// Weight file, one `<id> <alpha> <sigma>` per line
    #[arg(long, requires = "tree", value_name = "FILE")]
    pub weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "binary")]
    pub shape: ShapeArg,
    /// Depth of the binary shape
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    /// Node count of the chain and random shapes
    #[arg(long, default_value_t = 32)]
    pub size: usize,
    #[arg(long, value_enum, default_value = "corollary")]
    pub profile: ProfileArg,
    /// Exponent q in (1, 2]
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Seed for random shapes, weights, measures and estimators
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl InstanceArgs {
    pub fn spec(&self, seed: u64) -> InstanceSpec {
        let shape = match self.shape {
            ShapeArg::Binary => Shape::Binary { depth: self.depth },
            ShapeArg::Chain => Shape::Chain { len: self.size },
            ShapeArg::Random => Shape::Random { len: self.size },
        };
        let profile = match self.profile {
            ProfileArg::Corollary => Profile::Corollary,
            ProfileArg::Constant => Profile::Constant,
            ProfileArg::Random => Profile::Random,
        };
        InstanceSpec { shape, profile, q: self.q, seed }
    }

    pub fn load(&self) -> Result<WeightedTree> {
        self.load_seeded(self.seed)
    }

    pub fn load_seeded(&self, seed: u64) -> Result<WeightedTree> {
        match (&self.tree, &self.weights) {
            (Some(t), Some(w)) => {
                let tree = parse_tree(&read(t)?)?;
                Ok(parse_weights(&read(w)?, Arc::new(tree), self.q)?)
            }
            _ => Ok(generate(&self.spec(seed))?),
        }
    }
}

pub fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
