use std::process::ExitCode;

use clap::Parser;
use walkmax_cli::{execute, render, Cli, EXIT_CHECK_FAILED, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let env = match execute(&cli.command) {
        Ok(env) => env,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let text = render(&env, cli.output.format());
    if let Err(e) = envelope_out(&text, &cli) {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CHECK_FAILED as u8);
    }
    if let Some(failed) = env.checks.iter().find(|c| !c.passed) {
        eprintln!("check failed: {}", failed.name);
        return ExitCode::from(EXIT_CHECK_FAILED as u8);
    }
    ExitCode::SUCCESS
}

fn envelope_out(text: &str, cli: &Cli) -> std::io::Result<()> {
    walkmax_cli::envelope::write_output(text, cli.output.out.as_deref())
}
