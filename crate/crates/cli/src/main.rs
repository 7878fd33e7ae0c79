//! `hearken`: the operator command line.
//!
//! Stages talk to each other only through files, so any one of them can be
//! replaced by an outside tool:
//!
//! ```text
//! discover -> rank -> label -> (human review) -> label --import -> train -> bind -> chat | serve -> eval
//! ```
//!
//! Exit status: 0 on success, 1 when the command line is invalid, 2 when the
//! command fails while running.

mod args;
mod discover;
mod error;
mod files;
mod interview;
mod models;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Discover(a) => discover::discover(a),
        Command::Rank(a) => discover::rank(a),
        Command::Label(a) => discover::label(a),
        Command::Train(a) => models::train(a),
        Command::Crossval(a) => models::crossval(a),
        Command::Bind(a) => models::bind(a),
        Command::Chat(a) => interview::chat(a),
        Command::Serve(a) => interview::serve(a),
        Command::Eval(a) => interview::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
