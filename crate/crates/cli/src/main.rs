mod args;
mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{CommandFactory, Parser};

use args::{Cli, Command};
use error::CliError;

fn subcommand_name(command: &Command) -> &'static str {
    match command {
        Command::Synth(_) => "synth",
        Command::Train(_) => "train",
        Command::Reconstruct(_) => "reconstruct",
        Command::Saliency(_) => "saliency",
        Command::Gradcheck(_) => "gradcheck",
        Command::Grid(_) => "grid",
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    }
    match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Saliency(a) => commands::saliency(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Grid(a) => commands::grid(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                let mut cmd = Cli::command();
                cmd.build();
                if let Some(sub) = cmd.find_subcommand_mut(subcommand_name(&cli.command)) {
                    eprintln!("\n{}", sub.render_usage());
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
