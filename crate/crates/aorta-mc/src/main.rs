//! CLI entry point: subcommand dispatch and exit-code mapping.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aorta_mc::commands::{cmd_check, cmd_check_model, cmd_explore, cmd_run, CommonOpts};

#[derive(Parser)]
#[command(name = "aorta-mc", version, about = "Model checker for organization-aware multi-agent systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// System configuration file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Scheduling seed (run mode).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of stored states before aborting.
    #[arg(long = "state-cap", default_value_t = 100_000)]
    state_cap: usize,
    /// Exploration worker threads (explore mode).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Mode-specific output override: counterexample directory for check,
    /// model file for explore and check-model.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one seeded interleaving to an end state, printing the trace.
    Run(Common),
    /// Verify each configured property on the fly.
    Check(Common),
    /// Generate the entire state space and write the model file.
    Explore(Common),
    /// Verify each configured property against an exported model file.
    CheckModel(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    type Cmd = fn(&CommonOpts) -> Result<i32, aorta_mc::CliError>;
    let (run, common): (Cmd, &Common) = match &cli.command {
        Command::Run(c) => (cmd_run, c),
        Command::Check(c) => (cmd_check, c),
        Command::Explore(c) => (cmd_explore, c),
        Command::CheckModel(c) => (cmd_check_model, c),
    };
    let opts = CommonOpts {
        config: common.config.clone(),
        seed: common.seed,
        state_cap: common.state_cap,
        workers: common.workers.max(1),
        out: common.out.clone(),
    };
    match run(&opts) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
