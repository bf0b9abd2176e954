//! `aisets` — experiment runner for the aligned-image-sets laboratory.
//!
//! Every subcommand reads one JSON experiment config, runs a seeded,
//! reproducible computation, and writes plot-ready CSV/JSON artifacts that
//! embed the config hash and seed. Invariant falsifications serialize the
//! offending instance before exiting with a dedicated status code.

mod commands;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit code for a config/schema problem.
const EXIT_USAGE: u8 = 2;
/// Exit code for a falsified invariant (the instance is dumped first).
const EXIT_FALSIFIED: u8 = 3;

#[derive(Parser)]
#[command(name = "aisets", version, about = "Aligned-image-set experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON experiment config.
    #[arg(long, global = true, default_value = "experiment.json")]
    config: PathBuf,

    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "artifacts")]
    out: PathBuf,

    /// Worker threads (falls back to AISETS_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Reduce a general 2x2 channel to canonical form and verify the
    /// input transform round-trips.
    CanonicalReduce,
    /// Partition sampled realizations into aligned image sets.
    EnumerateSets,
    /// Check alignment-probability and expected-set-size bounds on a grid.
    BoundCheck,
    /// Compute entropy ledgers over the (P, n, alpha) grid.
    EntropyGrid,
    /// Zero forcing with quantized feedback: rates and fitted slopes.
    SchemeZf,
    /// Two-slot blind interference alignment: rates and fitted slopes.
    SchemeBia,
    /// Noise-free single-slot toy instance: per-channel image counts.
    Toy,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("AISETS_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("aisets: failed to build thread pool: {e}");
            return ExitCode::from(1);
        }
    };

    let mut config = match aisets_core::ExperimentConfig::from_path(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("aisets: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let outcome = pool.install(|| match cli.command {
        Command::CanonicalReduce => commands::canonical_reduce(&config, &cli.out),
        Command::EnumerateSets => commands::enumerate_sets(&config, &cli.out),
        Command::BoundCheck => commands::bound_check(&config, &cli.out),
        Command::EntropyGrid => commands::entropy_grid(&config, &cli.out),
        Command::SchemeZf => commands::scheme_zf(&config, &cli.out),
        Command::SchemeBia => commands::scheme_bia(&config, &cli.out),
        Command::Toy => commands::toy(&config, &cli.out),
    });

    match outcome {
        Ok(commands::RunStatus::Ok) => ExitCode::SUCCESS,
        Ok(commands::RunStatus::Falsified { dump }) => {
            eprintln!(
                "aisets: invariant falsified; instance dumped to {}",
                dump.display()
            );
            ExitCode::from(EXIT_FALSIFIED)
        }
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("aisets: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("aisets: {e}");
            ExitCode::from(1)
        }
    }
}
