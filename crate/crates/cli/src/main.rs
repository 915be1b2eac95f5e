use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use eqsat_opt::{run, Args};

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(out) => {
            let _ = std::io::stderr().write_all(out.stderr.as_bytes());
            let _ = std::io::stdout().write_all(out.stdout.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
