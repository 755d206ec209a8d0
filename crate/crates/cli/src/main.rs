mod args;
mod commands;
mod error;
mod output;

use std::process::ExitCode;

use clap::Parser;
use regraph::config::RunConfig;

use crate::args::Cli;
use crate::error::{invalid, runtime, CliError};
use crate::output::{emit, Target};

/// Defaults, then the config file, then flags.
fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let opts = cli.command.opts();
    let mut cfg = match &opts.config {
        Some(path) => {
            let bytes = std::fs::read(path).map_err(|e| runtime(format!("reading {path}: {e}")))?;
            RunConfig::from_text(&bytes).map_err(|e| invalid(format!("{path}: {e}")))?
        }
        None => RunConfig::default(),
    };
    cfg.apply("subcommand", cli.command.name()).map_err(invalid)?;
    for (k, v) in opts.pairs() {
        cfg.apply(k, &v).map_err(invalid)?;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global().map_err(runtime)?;
    }
    let outcome = commands::run(&cfg)?;
    let to_stdout = outcome.artifacts.iter().any(|(t, _)| *t == Target::Stdout);
    for (target, bytes) in &outcome.artifacts {
        emit(target, bytes)?;
    }
    if to_stdout {
        eprintln!("{}", outcome.summary);
    } else {
        println!("{}", outcome.summary);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("regraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
