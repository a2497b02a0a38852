//! `qtf`: fits, denoising, simulations and rate studies from the command
//! line.
//!
//! Exit codes: 0 success, 1 usage or I/O error (one line on stderr),
//! 2 the solver did not converge (results are still written).

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::{Context, Outcome};
use error::CliResult;

fn run(cli: &Cli) -> CliResult<Outcome> {
    let ctx = Context { quiet: cli.quiet };
    match &cli.command {
        Command::Fit(a) => commands::fit(&ctx, a),
        Command::Denoise2d(a) => commands::denoise2d(&ctx, a),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::Rate(a) => commands::rate(&ctx, a),
        Command::Oracle(a) => commands::oracle(&ctx, a),
        Command::Tune(a) => commands::tune(&ctx, a),
    }
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    if let Some(n) = cli.threads {
        let built = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
        if n == 0 || built.is_err() {
            eprintln!("error: usage: --threads must be a positive integer");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(Outcome::Converged) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: solver did not converge; results were written");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            ExitCode::from(1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    #[test]
    fn errors_fit_on_one_line() {
        assert_eq!(one_line("a\n  b\tc"), "a b c");
        let e = CliError::Usage("x".into());
        assert_eq!(e.to_string(), "usage: x");
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
