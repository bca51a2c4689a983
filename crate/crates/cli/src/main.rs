mod args;
mod commands;
mod outcome;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use outcome::{CmdResult, EXIT_USAGE};

/// Caps the global rayon pool, e.g. `CTCX_THREADS=1` for single-threaded runs.
const THREADS_ENV: &str = "CTCX_THREADS";

fn init_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV}={value:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn dispatch(command: &Command) -> CmdResult {
    match command {
        Command::Prepare(a) => commands::prepare(a),
        Command::Features(a) => commands::features(a),
        Command::Train(a) => commands::train(a),
        Command::Transfer(a) => commands::transfer(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Decode(a) => commands::decode(a),
        Command::Experiment(a) => commands::experiment(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_USAGE);
    }

    match dispatch(&cli.command) {
        Ok(out) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&out.json).unwrap_or_default());
            } else {
                println!("{}", out.summary);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.json {
                let body = serde_json::json!({ "error": format!("{:#}", e.error), "exit_code": e.code });
                println!("{body}");
            }
            eprintln!("error: {:#}", e.error);
            ExitCode::from(e.code)
        }
    }
}
