mod commands;
mod config;
mod error;
mod instance;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{CliError, EXIT_CODES_HELP, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "arbor", version, about = "Covering numbers, partitions and entropy bounds for weighted trees")]
#[command(args_override_self = true, after_help = EXIT_CODES_HELP)]
pub struct Cli {
    /// `key = value` defaults for the subcommand's flags; flags given on the
    /// command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output file; defaults to $ARBOR_OUTPUT_DIR/<subcommand>.<ext>, then stdout
    #[arg(long, short, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Worker threads for multi-seed runs (0 = all cores)
    #[arg(long, short, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an instance and write it as tree and weight files
    GenTree(commands::GenTreeArgs),
    /// Pairwise distances d, d̂ and d_𝕀 as CSV
    Dist(commands::DistArgs),
    /// Covering numbers and order-net numbers as CSV
    Nets(commands::NetsArgs),
    /// Root chain and partition tree with their checks, as JSON
    Partitions(commands::PartitionsArgs),
    /// Heavy/light decomposition of one measure, as JSON
    Decompose(commands::DecomposeArgs),
    /// Entropy number bounds of W or V as CSV
    Entropy(commands::EntropyArgs),
    /// Run every invariant check; exits 3 on a violation
    Verify(commands::VerifyArgs),
}

fn run(argv: Vec<OsString>) -> Result<(), CliError> {
    let argv = config::apply(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let out = output::Target::new(cli.out.clone());
    match &cli.command {
        Command::GenTree(a) => commands::gen_tree(a, &out),
        Command::Dist(a) => commands::dist(a, &out),
        Command::Nets(a) => commands::nets(a, &out),
        Command::Partitions(a) => commands::partitions(a, &out),
        Command::Decompose(a) => commands::decompose(a, &out),
        Command::Entropy(a) => commands::entropy(a, &out),
        Command::Verify(a) => commands::verify(a, &out, cli.jobs),
    }
}

fn main() {
    if let Err(e) = run(std::env::args_os().collect()) {
        eprintln!("arbor: {e}");
        std::process::exit(e.exit_code());
    }
}
