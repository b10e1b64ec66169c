use std::path::Path;

/// Exit codes, one per failure class.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;
pub const EXIT_WEIGHTS: i32 = 5;
pub const EXIT_SIZE: i32 = 6;
pub const EXIT_INFEASIBLE: i32 = 7;
pub const EXIT_PARAMETER: i32 = 8;
pub const EXIT_IO: i32 = 9;
pub const EXIT_CONFIG: i32 = 10;

pub const EXIT_CODES_HELP: &str = "\
Exit codes:
  0   success
  2   usage error (bad or missing flags)
  3   verify found invariant violations
  4   malformed tree, weight or measure file
  5   invalid weights (non-positive, non-finite, σ increasing along a branch)
  6   instance exceeds a size limit (exact covering numbers, distance tables)
  7   the chain hypothesis #(R_m \\ R_(m-1)) ≤ 2^m fails
  8   invalid parameter or measure
  9   I/O error reading input or writing output
  10  malformed config file

Environment:
  ARBOR_OUTPUT_DIR  directory for outputs when --out is not given; files are
                    named after the subcommand (verify.json, entropy.csv, …)";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] arbor::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("writing output: {0}")]
    Output(String),
    #[error("config {path}: {message}")]
    Config { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0} invariant check(s) failed")]
    Violations(usize),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use arbor::Error as E;
        match self {
            Self::Core(e) => match e {
                E::MalformedTree(_) | E::UnknownNode(_) | E::MalformedInput(_) => EXIT_MALFORMED,
                E::InvalidWeights(_) | E::SigmaIncreasing { .. } => EXIT_WEIGHTS,
                E::SizeLimit { .. } => EXIT_SIZE,
                E::InfeasibleNet { .. } => EXIT_INFEASIBLE,
                _ => EXIT_PARAMETER,
            },
            Self::Io { .. } | Self::Output(_) => EXIT_IO,
            Self::Config { .. } => EXIT_CONFIG,
            Self::Usage(_) => EXIT_USAGE,
            Self::Violations(_) => EXIT_VIOLATION,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
