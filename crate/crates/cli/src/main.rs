//! `camlens`: batch frontend for the camera-lens super-resolution toolkit.
//!
//! Exit codes: 0 success, 1 validation error, 2 I/O error, 64 usage error.

mod atomic;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use camlens_core::Error;

#[derive(Parser)]
#[command(name = "camlens", version, about = "Camera-lens super-resolution tooling")]
struct Cli {
    /// Worker threads for data-parallel stages; CAMLENS_THREADS is the
    /// fallback, all cores the default. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: commands::Command,
}

fn init_threads(flag: Option<usize>) {
    let from_env = || {
        std::env::var("CAMLENS_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    };
    if let Some(n) = flag.or_else(from_env) {
        if n >= 1 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Read { .. } | Error::Write { .. } | Error::Decode { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(64)
                }
            };
        }
    };
    init_threads(cli.threads);
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
