use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opwls_cli::config::SamplingKind;
use opwls_cli::{resolve, run, CliError, Overrides, RunStatus};

#[derive(Parser)]
#[command(name = "opwls", version, about = "Operator learning experiments with optimal weighted least squares")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        /// JSON config; optional when --preset is given (then it overrides the preset).
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// optimal | monte-carlo
        #[arg(long, value_parser = parse_sampling)]
        sampling: Option<SamplingKind>,
    },
    /// List the named presets.
    Presets,
}

fn parse_sampling(s: &str) -> Result<SamplingKind, String> {
    SamplingKind::parse(s).ok_or_else(|| format!("unknown sampling {s}; use optimal or monte-carlo"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Presets => {
            for name in opwls_cli::presets::NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::Run {
            config,
            seed,
            out,
            preset,
            trials,
            sampling,
        } => {
            if config.is_none() && preset.is_none() {
                return Err(CliError::Validation("give a config file, a --preset, or both".into()));
            }
            let text = config.map(std::fs::read_to_string).transpose()?;
            let overrides = Overrides {
                seed,
                out,
                trials,
                sampling,
            };
            let cfg = resolve(preset.as_deref(), text.as_deref(), &overrides)?;
            match run(&cfg)? {
                RunStatus::Completed { dir, output } => {
                    println!("wrote {} fits to {}", output.fits.len(), dir.display());
                }
                RunStatus::UpToDate { dir } => println!("{} is up to date", dir.display()),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(2)
        }
    }
}
