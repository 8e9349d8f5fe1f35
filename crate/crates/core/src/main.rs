use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tensegrity_evo::experiment::{cmd_dump_module, cmd_evolve, cmd_replay, ExperimentConfig};
use tensegrity_evo::Error;

/// Evolve, replay and inspect modular tensegrity robots.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every evolution listed in a config and write the summary.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        /// Parallel workers; overrides the config value. 0 means one per CPU.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-simulate a saved champion and write its trajectory CSV.
    Replay {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the canonical module as JSON.
    DumpModule {
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Artifact(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn execute(command: Command) -> tensegrity_evo::Result<()> {
    match command {
        Command::Evolve { config, workers } => {
            let config = ExperimentConfig::load(&config)?;
            let rows = cmd_evolve(&config, workers.unwrap_or(config.workers))?;
            println!(
                "{} runs written to {}",
                rows.len(),
                config.output_directory.display()
            );
        }
        Command::Replay { genome, config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let report = cmd_replay(&genome, &config, &out)?;
            println!("regime: {}", report.regime);
            println!("fitness: {}", report.fitness);
            println!("gait: {}", report.gait.map_or("-", |g| g.label()));
        }
        Command::DumpModule { out } => cmd_dump_module(&out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
