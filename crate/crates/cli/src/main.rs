use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use klboost::commands::{
    cmd_calibrate, cmd_detect, cmd_evaluate, cmd_recommend, cmd_simulate, CalibrateArgs,
    CliError, DetectArgs, EvaluateArgs, RecommendArgs, SimulateArgs,
};

/// Short-term interest detection and top-N re-ranking for session-based
/// recommenders.
#[derive(Parser)]
#[command(name = "klboost", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate per-property, per-length divergence thresholds
    Calibrate(CalibrateArgs),
    /// Sessionize an event log and report per-session interests
    Detect(DetectArgs),
    /// Rank top-N items for one session
    Recommend(RecommendArgs),
    /// Generate a synthetic catalog and event log
    Simulate(SimulateArgs),
    /// Compare base and enhanced algorithms with leave-last-out metrics
    Evaluate(EvaluateArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Detect(args) => cmd_detect(args),
        Command::Recommend(args) => cmd_recommend(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
