use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dipolar_core::runner::{init_threads, list_experiments, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dipolar", version, about = "Dipolar XY spin-model experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a config, run it and write CSV outputs plus manifest.json.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Parse and validate a config without computing anything.
    Validate { config: PathBuf },
    /// List the experiment kinds.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cmd: Command) -> dipolar_core::Result<()> {
    match cmd {
        Command::Run { config, output_dir } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            let threads = init_threads()?;
            eprintln!("running {} on {threads} thread(s)", cfg.kind.name());
            let report = run(&cfg)?;
            for f in &report.files {
                println!("{}", report.output_dir.join(f).display());
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("ok: {} ({})", cfg.kind.name(), cfg.hash()?);
        }
        Command::ListExperiments => {
            for (name, desc) in list_experiments() {
                println!("{name:<16} {desc}");
            }
        }
    }
    Ok(())
}
