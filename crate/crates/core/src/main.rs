use std::process::ExitCode;

use carousel_bandit::cli::{self, Cli, THREADS_ENV};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }

    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli::execute(cli.command, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
