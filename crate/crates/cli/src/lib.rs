//! Command-line front end for resample-aggregated clustering: argument
//! grammar, input loading, report files and the subcommands.

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod report;

pub use error::{CliError, CliResult};

/// Runs a parsed command line on a thread pool of the requested size.
pub fn run(cli: args::Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| commands::dispatch(&cli.command))
}
