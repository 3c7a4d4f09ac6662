//! The `gi` command line: run an experiment, evaluate one source file, or
//! minimize a stored patch.

mod commands;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{cmd_eval, cmd_minimize, cmd_run, workers_from_env, RunOutput};
pub use error::CliError;

/// Exit status when the run finished but found nothing better than the baseline.
pub const EXIT_NO_IMPROVEMENT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "gi", version, about = "Patch-based genetic improvement with language-model mutations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evolve the target program and write the best variant.
    Run(RunArgs),
    /// Print the fitness report of one source file as JSON.
    Eval(EvalArgs),
    /// Reduce a patch to the edits that matter.
    Minimize(MinimizeArgs),
}

#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `evolution.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for report.json and the best variant; defaults to runs/<run_id>.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay completions from this JSON map instead of the configured provider.
    #[arg(long)]
    pub mock: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Clone)]
pub struct EvalArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(clap::Args, Debug, Clone)]
pub struct MinimizeArgs {
    #[arg(long)]
    pub patch: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; the minimized patch goes to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args).map(|out| {
            eprintln!("{}", out.summary);
            println!("{}", out.dir.display());
            if out.report.improved() {
                0
            } else {
                EXIT_NO_IMPROVEMENT
            }
        }),
        Command::Eval(args) => cmd_eval(&args).map(|report| {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            0
        }),
        Command::Minimize(args) => cmd_minimize(&args).map(|patch| {
            if args.out.is_none() {
                println!("{}", patch.to_json());
            }
            0
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("gi: {e}");
        e.exit_code()
    })
}
