use std::process::ExitCode;

use clap::Parser;
use periodic_forms_cli::{run, Cli};

/// Caps rayon's worker count when `PERIODIC_FORMS_THREADS` is set.
fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("PERIODIC_FORMS_THREADS") else { return Ok(()) };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("PERIODIC_FORMS_THREADS must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let as_json = match &cli.command {
        periodic_forms_cli::Command::Analyze { common, .. }
        | periodic_forms_cli::Command::Certify { common, .. }
        | periodic_forms_cli::Command::Float { common, .. }
        | periodic_forms_cli::Command::Refine { common, .. }
        | periodic_forms_cli::Command::Optimize { common, .. } => common.json,
    };
    match run(&cli.command) {
        Ok(out) => {
            print!("{}", out.render(as_json));
            ExitCode::from(out.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
