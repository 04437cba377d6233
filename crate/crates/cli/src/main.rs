//! `iris-he` command-line tool.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{apply_config, Cli, Command};
use commands::Failure;

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

fn run() -> Result<(), Failure> {
    let mut argv: Vec<String> = std::env::args().collect();
    if let Some(path) = config_path(&argv) {
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
        argv = apply_config(argv, &text).map_err(|e| Failure::Input(format!("{path}: {e}")))?;
    }
    let cli = Cli::try_parse_from(&argv).unwrap_or_else(|e| e.exit());

    if let Ok(v) = std::env::var("IRIS_HE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::Input(format!("IRIS_HE_THREADS='{v}' is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Input(e.to_string()))?;
    }

    match &cli.command {
        Command::Enroll(a) => commands::enroll(a),
        Command::Match(a) => commands::match_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Bench(a) => commands::bench(a),
        Command::Synth(a) => commands::synth(a),
        Command::Keygen(a) => commands::keygen_cmd(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
