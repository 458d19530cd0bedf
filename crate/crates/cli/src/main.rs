use std::process::ExitCode;

use clap::Parser;
use tsad_cli::app::{run, Cli};
use tsad_cli::exit_code;
use tsad_core::Error;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::NonFiniteLoss {
                last_checkpoint: Some(p), ..
            } = &e
            {
                eprintln!("last good checkpoint: {}", p.display());
            }
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
