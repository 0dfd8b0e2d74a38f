//! `pdoa`: data generation, training, adaptation, evaluation and reporting.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod commands;
mod config;

use commands::Run;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "pdoa", version, about = "Preference-distribution offline adaptation pipeline")]
struct Cli {
    /// TOML run configuration; defaults apply to anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run only this seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-target fan-out.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true, env = "PDOA_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an offline dataset per seed.
    GenData,
    /// Train the preference-conditioned bundle and the cloning baseline.
    Train,
    /// Adapt a preference distribution to each target's demonstrations.
    Adapt {
        /// Also write per-step optimizer traces.
        #[arg(long)]
        trace: bool,
    },
    /// Roll out adapted policies for every target and summarize.
    Eval {
        /// Add the oracle that is told the target preference.
        #[arg(long)]
        oracle: bool,
    },
    /// Aggregate evaluation summaries across seeds.
    Report {
        /// Summary files; the configured seeds' summaries when omitted.
        paths: Vec<PathBuf>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let run = Run {
        out: cli.out.unwrap_or_else(|| cfg.out_dir.clone()),
        seeds: cli.seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]),
        cfg,
    };
    match cli.command {
        Command::GenData => commands::gen_data(&run),
        Command::Train => commands::train(&run),
        Command::Adapt { trace } => commands::adapt(&run, trace),
        Command::Eval { oracle } => commands::eval(&run, oracle),
        Command::Report { paths } => commands::report(&run, &paths),
    }
}
