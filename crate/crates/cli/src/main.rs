use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

mod args;
mod commands;

use args::Cli;

fn version() -> String {
    format!(
        "{} (AFEA v{}, ACKP v{})",
        env!("CARGO_PKG_VERSION"),
        augssl_core::FEATURE_FORMAT_VERSION,
        augssl_core::CHECKPOINT_FORMAT_VERSION
    )
}

/// One JSON object on one line: `{"error":"<kind>","message":"..."}`.
fn error_line(err: &anyhow::Error) -> String {
    let kind = err
        .chain()
        .find_map(|e| {
            if let Some(core) = e.downcast_ref::<augssl_core::Error>() {
                Some(core.kind())
            } else if e.is::<std::io::Error>() {
                Some("io")
            } else {
                None
            }
        })
        .unwrap_or("usage");
    let message = format!("{err:#}").replace('\n', " ");
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    env_logger::Builder::new()
        .parse_filters(&cli.global.log_level)
        .format_timestamp(None)
        .init();
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::FAILURE
        }
    }
}
