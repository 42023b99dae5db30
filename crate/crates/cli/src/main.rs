use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use regret_tree_cli::{
    run_command, threads_from_env, CliError, Command, Overrides, ResampleMode, RunConfig,
};

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum Resample {
    Bootstrap,
    LabelRedraw,
}

/// Leaf and structural regret experiments for decision trees.
#[derive(Debug, Parser)]
#[command(name = "regret-tree", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides every replication count (realizations and bootstrap trees).
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// How replicate trees are drawn for structural regret.
    #[arg(long, value_enum)]
    resample: Option<Resample>,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let threads = threads_from_env(std::env::var("REGRET_TREE_THREADS").ok().as_deref())?;
    if let Some(t) = threads {
        regret_tree::par::init_threads(t);
    }
    let mut config = RunConfig::load(&cli.config)?;
    config.apply(&Overrides {
        seed: cli.seed,
        replications: cli.replications,
        min_leaf: cli.min_leaf,
        max_depth: cli.max_depth,
        out: cli.out,
        resample: cli.resample.map(|r| match r {
            Resample::Bootstrap => ResampleMode::Bootstrap,
            Resample::LabelRedraw => ResampleMode::LabelRedraw,
        }),
    });
    run_command(cli.command, &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("regret-tree: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
