use anyhow::Context;
use clap::Parser;
use sordor::commands::{run, Command};

/// Broadband universal-rotation pulse design with quadratic phase dispersion.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("SORDOR_THREADS") {
        let n: usize = threads.parse().context("SORDOR_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    run(&cli.command)?;
    Ok(())
}
