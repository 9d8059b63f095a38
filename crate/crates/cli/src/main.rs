use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmrf_cli::config::memory_cap_from_env;
use nmrf_cli::{parse_config, run, CliError};

#[derive(Parser)]
#[command(name = "nmrf", version, about = "Non-Markovian emitter dynamics from a virtual density-matrix ensemble")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Directory for output files.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Replace or add a configuration entry, `KEY=VALUE`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn execute(config: &PathBuf, out: &PathBuf, overrides: &[String]) -> Result<(), CliError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg = parse_config(&text, overrides, memory_cap_from_env()?)?;
    let outcome = run(&cfg, out)?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for file in &outcome.files {
        eprintln!("wrote {}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let Command::Run { config, out, overrides } = cli.command;
    match execute(&config, &out, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
