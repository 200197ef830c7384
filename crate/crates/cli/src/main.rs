use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::Overrides;

/// Bandit convex optimization with memory and bandit control experiments.
#[derive(Parser)]
#[command(name = "bandit-lds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic BCO-M runs.
    Bcom {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Bandit control runs on generated linear systems.
    Control {
        #[command(subcommand)]
        action: RunAction,
    },
    /// Multi-seed scaling sweep with a log-log slope fit per arm.
    Sweep(Common),
    /// Runs every invariant suite and prints a pass/fail table.
    Check(Common),
}

#[derive(Subcommand)]
enum RunAction {
    /// Runs every (horizon, seed, arm) cell of the config.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use seeds `0..n` instead of the configured list.
    #[arg(long)]
    seeds: Option<usize>,
    /// Worker threads for sweep cells.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seeds: self.seeds, jobs: self.jobs }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Bcom { action: RunAction::Run(c) } => commands::bcom_run(&c.config, &c.overrides()),
        Command::Control { action: RunAction::Run(c) } => commands::control_run(&c.config, &c.overrides()),
        Command::Sweep(c) => commands::sweep(&c.config, &c.overrides()),
        Command::Check(c) => commands::check(&c.config, &c.overrides()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
