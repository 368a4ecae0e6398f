use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, LevelFilter};

use gwde_cli::{run, CliError, Command, RunConfig};

/// Extinction, criticality and dimension computations for Galton-Watson processes
/// driven by expanding circle maps.
#[derive(Parser, Debug)]
#[command(name = "gwde", version)]
struct Args {
    /// Subcommand to run.
    #[arg(value_enum)]
    command: Command,
    /// Config file of `section.key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.path`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker thread cap (overrides `run.threads`).
    #[arg(long)]
    threads: Option<usize>,
    /// Random seed (overrides `run.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn init_logging() {
    let level = match std::env::var("GWDE_LOG").as_deref() {
        Ok("quiet") => LevelFilter::Off,
        Ok("debug") => LevelFilter::Debug,
        Ok("info") => LevelFilter::Info,
        _ => LevelFilter::Warn,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.run.threads = Some(threads);
    }
    if let Some(out) = &args.out {
        config.output.path = out.to_string_lossy().into_owned();
    }
    config.validate()?;
    if let Some(n) = config.run.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failed(e.to_string()))?;
    }
    let dir = PathBuf::from(&config.output.path);
    let out = run(args.command, &config, &dir)?;
    for path in out.written() {
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    init_logging();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("gwde: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
