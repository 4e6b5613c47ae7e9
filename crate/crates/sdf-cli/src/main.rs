use clap::error::ErrorKind;
use clap::Parser;

use sdf_cli::args::Cli;
use sdf_cli::commands;

/// Exit codes: 0 success, 1 usage, 2 data error, 3 config error,
/// 4 internal invariant violation.
fn exit_code(err: &sdf_core::Error) -> i32 {
    match err {
        sdf_core::Error::Io { .. } | sdf_core::Error::Data(_) | sdf_core::Error::Model(_) => 2,
        sdf_core::Error::Config(_) => 3,
        sdf_core::Error::Invariant(_) => 4,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
