//! Command-line pipelines over `kmd-core`: ingestion checks, decomposition,
//! sparsity sweeps, reconstruction and heatmap rendering.
//!
//! Every artifact-producing command stages its files and moves them into
//! place only on success. Exit status is 0 on success, 1 for usage errors and
//! 2 for runtime failures.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod ppm;
pub mod summary;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::CliResult;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format(|buf, record| {
            use std::io::Write;
            writeln!(buf, "{}: {}", record.level().as_str().to_lowercase(), record.args())
        })
        .try_init();
}

pub fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::IngestInfo(a) => commands::ingest_info(a),
        Command::Decompose(a) => commands::decompose(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Heatmap(a) => commands::heatmap(a),
    }
}

/// Parse `argv`, run the command and return the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    init_logging(cli.verbose);
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
