use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use thermocontact_cli::{check, load_config, run, CliError};

/// Thermocapillary free-boundary simulator with moving contact points.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// JSON configuration file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel modes.
    #[arg(long)]
    threads: Option<usize>,
    /// Check the configuration and exit.
    #[arg(long)]
    validate_only: bool,
    /// Seed for random initial modes, overriding initial.seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(vec![format!("--threads {n}: {e}")]))?;
    }
    let mut cfg = load_config(args.config.as_deref(), std::env::vars())?;
    if let Some(dir) = &args.out {
        cfg.output.directory = dir.display().to_string();
    }
    if let Some(seed) = args.seed {
        cfg.initial.seed = seed;
    }
    if args.validate_only {
        check(&cfg)?;
        println!("configuration valid ({:?} mode)", cfg.mode);
        return Ok(());
    }
    let outcome = run(&cfg)?;
    println!("{} files written to {}", outcome.files.len(), outcome.directory.display());
    Ok(())
}
