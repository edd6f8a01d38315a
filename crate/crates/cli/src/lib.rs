//! Experiment harness: dataset generation, training, evaluation against
//! the classical solvers, timing and size generalization, all reported as
//! CSV.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

pub mod commands;
pub mod config;
pub mod methods;

use std::ffi::OsString;

use clap::Parser;

use config::{Cli, Command};

/// Why a command stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or configuration; nothing was run.
    Usage(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::BenchTime(a) => commands::bench_time(a),
        Command::Generalize(a) => commands::generalize(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
            }
            f.exit_code()
        }
    }
}
