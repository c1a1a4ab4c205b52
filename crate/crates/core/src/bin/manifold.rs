use std::process::ExitCode;

use clap::Parser;
use manifold::cli::{run, Cli};
use manifold::error::Error;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(threads) = std::env::var("MANIFOLD_THREADS") {
        let n = match threads.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("Config: MANIFOLD_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(1);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("Config: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            if matches!(e, Error::DisconnectedGraph { .. }) {
                eprintln!("hint: raise k until the neighborhood graph is connected");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
