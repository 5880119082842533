mod commands;
mod config;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use csplab_core::CspError;

use config::{Cli, Format};

fn exit_code(e: &CspError) -> u8 {
    match e {
        CspError::SizeCap { .. } => 3,
        CspError::Io(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = cli.command.split();
    let result = flags.merged().and_then(|flags| {
        if let Some(w) = flags.workers {
            rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build_global()
                .map_err(|e| CspError::Validation(format!("worker pool: {e}")))?;
        }
        let report = commands::run(kind, &flags)?;
        let body = match flags.format() {
            Format::Json => serde_json::to_string_pretty(&report.json)? + "\n",
            Format::Csv => report.csv,
        };
        match &flags.out {
            Some(path) => std::fs::write(path, body)?,
            None => std::io::stdout().write_all(body.as_bytes())?,
        }
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
