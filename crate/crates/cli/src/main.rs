use std::process::ExitCode;

use clap::Parser;
use dccpd_cli::Args;

fn main() -> ExitCode {
    let args = Args::parse();
    match dccpd_cli::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
