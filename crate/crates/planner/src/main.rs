use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use irs_uav::cli::{self, Cli, ErrorReport};

fn fail(report: &ErrorReport, code: u8) -> ExitCode {
    eprintln!(
        "{}",
        serde_json::to_string(report).expect("error report serialises")
    );
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let report = ErrorReport {
                error: "usage",
                message: e.kind().to_string()
                    + ": "
                    + e.to_string().lines().next().unwrap_or_default(),
                field: None,
            };
            return fail(&report, 2);
        }
    };
    match cli::run(&parsed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e.report(), 1),
    }
}
