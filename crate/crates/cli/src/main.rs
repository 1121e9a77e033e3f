//! Command-line front end: cluster a dataset, tune the conformal
//! parameters, or run a benchmark manifest.

mod benchmark;
mod cluster;
mod common;
mod tune;

use clap::Parser;

use common::{exit_code, CliError};

#[derive(Parser)]
#[command(
    name = "cpclust",
    version,
    about = "Spectral clustering with conformal-prediction affinities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand)]
enum Command {
    /// Cluster one dataset with a chosen affinity method.
    Cluster(cluster::ClusterArgs),
    /// Silhouette-driven (epsilon, k) grid search for cpsca/hybrid.
    Tune(tune::TuneArgs),
    /// Run every dataset x method cell of a JSON manifest.
    Benchmark(benchmark::BenchmarkArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version through the error path too.
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    let outcome: Result<(), CliError> = match cli.command {
        Command::Cluster(args) => cluster::run(args),
        Command::Tune(args) => tune::run(args),
        Command::Benchmark(args) => benchmark::run(args),
    };
    if let Err(e) = outcome {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
