//! Command-line front end for the `qfe` library.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;

use clap::Parser;

pub mod args;
mod commands;
pub mod config;
pub mod error;
pub mod plot;

pub use args::{Cli, Command};
pub use error::{CliError, CliResult};

fn init_logging() {
    let env = env_logger::Env::new().filter_or("QFE_LOG", "warn");
    // A second call (tests run many commands in one process) is harmless.
    let _ = env_logger::Builder::from_env(env).format_target(false).try_init();
}

enum ParseFailure {
    Clap(clap::Error),
    Config(CliError),
}

fn parse(argv: &[OsString]) -> Result<Cli, ParseFailure> {
    let argv = match config::prescan(argv) {
        Some((path, command)) => {
            let extra = config::config_args(&path, &command).map_err(ParseFailure::Config)?;
            config::splice_after_command(argv, &command, extra)
        }
        None => argv.to_vec(),
    };
    Cli::try_parse_from(argv).map_err(ParseFailure::Clap)
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status: 0 on success, 1 on usage errors, 2 otherwise.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match parse(&argv) {
        Ok(cli) => cli,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
        Err(ParseFailure::Config(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command line inside a dedicated worker pool.
pub fn run(cli: &Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cli.threads.unwrap_or(0))))?;
    pool.install(|| commands::dispatch(&cli.command))
}
