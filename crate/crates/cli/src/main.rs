use std::path::PathBuf;
use std::process::ExitCode;

use balayage_lab::scenario::{run_scenario, RunOptions};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "balayage-lab", version, about = "Potential-theory audits of zero sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its report.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with status 2 when a verdict is "diverging".
        #[arg(long)]
        strict: bool,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the angular node count of the averaging rule.
        #[arg(long)]
        nodes: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out,
            strict,
            seed,
            nodes,
        } => {
            let opts = RunOptions { out, strict, seed, nodes };
            match run_scenario(&scenario, &opts) {
                Ok(outcome) => {
                    for f in &outcome.files {
                        println!("{}", f.display());
                    }
                    if outcome.diverging {
                        eprintln!("verdict: diverging");
                    }
                    ExitCode::from(outcome.exit_code(strict) as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
    }
}
