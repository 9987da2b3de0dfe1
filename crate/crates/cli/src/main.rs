use std::process::ExitCode;

use clap::Parser;
use coldpack_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match coldpack_cli::commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(coldpack_cli::exit_code(&e) as u8)
        }
    }
}
