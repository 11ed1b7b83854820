mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Volume-constrained MBO experiments.
#[derive(Parser)]
#[command(name = "mbo", version)]
struct Cli {
    /// Output directory (overrides output.directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random draws (overrides random_seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run { config: PathBuf },
    /// Run the experiment once per time step, to the config's final time.
    Sweep {
        config: PathBuf,
        /// Comma-separated time steps, e.g. 2.4e-4,5.5e-4,9.8e-4.
        #[arg(long = "h", value_delimiter = ',', num_args = 0..)]
        h: Vec<f64>,
    },
    /// Run a verification suite: kernel, estimates, constants or all.
    Verify { suite: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = cli.out.as_deref();
    let result = match &cli.command {
        Command::Run { config } => commands::cmd_run(config, out, cli.seed).map(|_| true),
        Command::Sweep { config, h } => commands::cmd_sweep(config, h, out, cli.seed).map(|_| true),
        Command::Verify { suite } => commands::cmd_verify(suite, out, cli.seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.exit_code() as u8)
        }
    }
}
