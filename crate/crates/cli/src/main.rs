//! `abroca` command-line tool.

mod args;
mod commands;
mod config;
mod error;
mod manifest;
mod svg;

use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use crate::args::{Cli, Command};
use crate::error::CliError;
use crate::manifest::OutputSink;

fn resolved_config(cli: &Cli) -> Result<Value, CliError> {
    let mut obj = serde_json::to_value(&cli.common)?;
    let cmd = match &cli.command {
        Command::Test(a) => serde_json::to_value(a)?,
        Command::Power(a) => serde_json::to_value(a)?,
        Command::GenNull(a) => serde_json::to_value(a)?,
        Command::Fit(a) => serde_json::to_value(a)?,
    };
    if let (Value::Object(dst), Value::Object(src)) = (&mut obj, cmd) {
        dst.extend(src);
    }
    Ok(obj)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let threads = match cli.common.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(k) => k,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
    let config = resolved_config(&cli)?;
    let (seed, format) = (cli.common.seed, cli.common.format);
    let mut sink = OutputSink::new(cli.command.name(), config, seed, threads, &cli.common.out_dir)?;
    pool.install(|| match &cli.command {
        Command::Test(a) => commands::cmd_test(a, seed, format, &mut sink),
        Command::Power(a) => commands::cmd_power(a, seed, format, &mut sink),
        Command::GenNull(a) => commands::cmd_gen_null(a, seed, format, &mut sink),
        Command::Fit(a) => commands::cmd_fit(a, seed, format, &mut sink),
    })?;
    for path in &sink.written {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let argv = match config::merge_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
