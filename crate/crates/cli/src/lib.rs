//! Command-line frontend: argument parsing, run configuration and the
//! CSV/JSON interchange formats.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use args::{Cli, Command};
use error::CliResult;

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::Compare(a) => commands::cmd_compare(a),
        Command::Trajectories(a) => commands::cmd_trajectories(a),
        Command::Scan(a) => commands::cmd_scan(a),
        Command::Bench(a) => commands::cmd_bench(a),
    }
}
