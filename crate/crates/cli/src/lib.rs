//! Command-line workflows over the ranking toolkit and the context generator.
//!
//! Every subcommand reads an optional JSON config file, applies command-line overrides on
//! top of it and writes deterministic outputs. Exit codes are stable: 0 on success, 2 for
//! usage or input errors, 3 when the generation endpoint fails, and 1 for anything else.

pub mod args;
pub mod commands;
pub mod config;
pub mod failure;

pub use args::{Cli, Command};
pub use failure::{CmdResult, Failure};

/// Runs one parsed command line.
pub fn run(cli: Cli) -> CmdResult<()> {
    let config = config::load(cli.global.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => commands::generate::run(&cli.global, config, args),
        Command::Train(args) => commands::train::run(&cli.global, config, args),
        Command::Eval(args) => commands::eval::run(&cli.global, config, args),
        Command::Analyze(args) => commands::analyze::run(config, args),
        Command::Convert(args) => commands::convert::run(config, args),
    }
}
