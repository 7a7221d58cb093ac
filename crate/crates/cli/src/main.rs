use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Runs a Cahn-Hilliard-Darcy experiment described by an INI config file.
///
/// Exit status: 0 success, 2 invalid configuration, 3 integration failure,
/// 4 non-convergence, 1 other errors.
#[derive(Parser, Debug)]
#[command(name = "chd-lab", version)]
struct Args {
    /// Path to the INI config.
    config: PathBuf,

    /// Replace a config value, as `section.key=value`. Repeatable.
    #[arg(long = "override", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match chd_lab::run_file(&args.config, &args.overrides) {
        Ok(outcome) => {
            for (k, v) in &outcome.summary {
                println!("{k} = {v}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("chd-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
