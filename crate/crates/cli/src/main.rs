mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::Cli;
use commands::{run, CliError, Outcome, SCHEMA_VERSION};

/// Exit statuses: 0 success, 1 a check failed, 2 usage error, 3 construction error.
const CHECK_FAILED: u8 = 1;
const USAGE: u8 = 2;
const FAILED: u8 = 3;

fn error_record(kind: &str, message: &str) -> String {
    let record = json!({ "schema_version": SCHEMA_VERSION, "error": { "kind": kind, "message": message } });
    format!("{}\n", serde_json::to_string_pretty(&record).expect("error records always serialize"))
}

fn write_outputs(out: Option<&std::path::Path>, outcome: &Outcome) -> Result<(), CliError> {
    match out {
        None => {
            // CSV duplicates the JSON character; stdout gets the JSON only
            for (name, text) in &outcome.files {
                if name.ends_with(".json") {
                    print!("{text}");
                }
            }
        }
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for (name, text) in &outcome.files {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            println!("{}", outcome.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{}", error_record("usage", e.to_string().trim_end()));
            return ExitCode::from(USAGE);
        }
    };
    let common = cli.command.common();
    if common.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(common.jobs).build_global() {
            eprint!("{}", error_record("usage", &format!("--jobs: {e}")));
            return ExitCode::from(USAGE);
        }
    }
    let out = common.out.clone();
    let result = run(&cli.command).and_then(|outcome| write_outputs(out.as_deref(), &outcome).map(|()| outcome));
    match result {
        Ok(outcome) if outcome.passed => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(CHECK_FAILED),
        Err(e) => {
            let record = error_record(e.kind(), &e.to_string());
            eprint!("{record}");
            if let Some(dir) = &out {
                let _ = std::fs::create_dir_all(dir).and_then(|()| std::fs::write(dir.join("error.json"), &record));
            }
            ExitCode::from(if matches!(e, CliError::Usage(_)) { USAGE } else { FAILED })
        }
    }
}
