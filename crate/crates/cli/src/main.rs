//! `mixgeo <subcommand> --config <path> [--seed N] [--out DIR]`

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mixgeo_core::config::Config;
use mixgeo_core::experiments::{run_cstar, run_entropy, run_figure1, run_gauss, run_ratio, run_slice, RunContext};
use mixgeo_core::{Error, Result};

#[derive(Parser)]
#[command(name = "mixgeo", version, about = "Local geometry experiments for finite location mixtures")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sublevel sets of h and N over two-atom mixtures.
    Figure1(Common),
    /// Search estimate of the comparison constant.
    Cstar(Common),
    /// Stratified h/N scan.
    Ratio(Common),
    /// Local entropy slopes.
    Entropy(Common),
    /// Gaussian envelope norms against T.
    Gauss(Common),
    /// Slicing demonstrations.
    Slice(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn threads() -> Result<()> {
    let Ok(raw) = std::env::var("MIXGEO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("MIXGEO_THREADS = {raw:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn context(c: &Common) -> Result<RunContext> {
    RunContext::new(Config::load(&c.config)?, c.seed, Some(c.out.clone()))
}

fn run(cli: Cli) -> Result<String> {
    threads()?;
    match &cli.cmd {
        Cmd::Figure1(c) => run_figure1(&context(c)?)?.to_json(),
        Cmd::Cstar(c) => run_cstar(&context(c)?)?.to_json(),
        Cmd::Ratio(c) => run_ratio(&context(c)?)?.to_json(),
        Cmd::Entropy(c) => run_entropy(&context(c)?)?.to_json(),
        Cmd::Gauss(c) => run_gauss(&context(c)?)?.to_json(),
        Cmd::Slice(c) => run_slice(&context(c)?)?.to_json(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(json) => {
            print!("{json}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mixgeo: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
