use std::process::ExitCode;

use clap::Parser;
use fedkg_cli::settings::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    // one-shot commands keep stderr for the error document
    let level = match cli.command {
        Command::Serve(_) => tracing::Level::INFO,
        _ => tracing::Level::WARN,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .init();
    fedkg_cli::run(cli)
}
