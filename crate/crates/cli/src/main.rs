use clap::Parser;
use polarlab_cli::{config, run, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Batch experiment runner for attraction-repulsion opinion dynamics.
#[derive(Parser)]
#[command(name = "polarlab", version, about)]
struct Args {
    /// Experiment configuration (TOML)
    config_file: PathBuf,

    /// Override the config's output directory
    #[arg(long)]
    output_dir: Option<String>,

    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads for Monte-Carlo parallelism (default: config, then
    /// POLARLAB_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("polarlab: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config_file)
        .map_err(CliError::io(args.config_file.display().to_string()))?;
    let mut config = config::parse_config(&text)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let manifest = run::run_with_workers(&config, args.workers)?;
    println!(
        "wrote {} file(s) to {}",
        manifest.output_files.len(),
        config.output_dir
    );
    Ok(())
}
