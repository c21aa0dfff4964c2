//! Command-line front end: subcommand dispatch over problem files. No
//! interactive mode; the intended users are scripts and test harnesses.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{
    cmd_check, cmd_dist, cmd_expect, cmd_gapfn, cmd_pp_expect, CommandOutput, RunOptions,
    EXIT_PARSE,
};
use crate::problem::BUDGET_ENV_VAR;

#[derive(Parser)]
#[command(
    name = "condexp",
    version,
    about = "Certified distances and conditional expectations onto subalgebras, over exact arithmetic"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate a problem file: trace normalization, unit-ball generators,
    /// adjoint closure, inclusion terms, declared cross-checks
    Check { problem: PathBuf },
    /// Certified distance from the target to the subalgebra via the
    /// interleaved two-machine search
    Dist {
        problem: PathBuf,
        /// Certify within 2^-k (overrides the file)
        #[arg(long, value_name = "k")]
        precision: Option<u32>,
        /// Oracle-query budget per machine (overrides the file)
        #[arg(long, value_name = "n")]
        budget: Option<u64>,
        /// Print the emission log (LB/UB/ACCEPT lines)
        #[arg(long)]
        audit: bool,
        /// Run the two machines on separate threads (same result as the
        /// reference mode)
        #[arg(long)]
        parallel: bool,
    },
    /// Conditional expectation of the target as a subalgebra point
    Expect {
        problem: PathBuf,
        #[arg(long, value_name = "k")]
        precision: Option<u32>,
        #[arg(long, value_name = "n")]
        budget: Option<u64>,
        /// Drive the search with the exact backend distance instead of the
        /// certified interleaved estimate
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        parallel: bool,
    },
    /// Conditional expectation through the declared reconstruction basis
    #[command(name = "pp-expect")]
    PpExpect {
        problem: PathBuf,
        #[arg(long, value_name = "k")]
        precision: Option<u32>,
        #[arg(long, value_name = "n")]
        budget: Option<u64>,
    },
    /// Tabulate the spectral gap function derived from the Kazhdan data
    Gapfn { problem: PathBuf },
}

fn read(problem: &PathBuf) -> Result<String, CommandOutput> {
    std::fs::read_to_string(problem).map_err(|e| CommandOutput {
        exit_code: EXIT_PARSE,
        stdout: format!("ERROR cannot read {}: {e}\n", problem.display()),
    })
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    let env_budget = std::env::var(BUDGET_ENV_VAR).ok().and_then(|s| s.parse().ok());
    let base = RunOptions { env_budget, ..Default::default() };
    let out = match cli.command {
        Cmd::Check { problem } => match read(&problem) {
            Ok(text) => cmd_check(&text),
            Err(out) => out,
        },
        Cmd::Dist { problem, precision, budget, audit, parallel } => match read(&problem) {
            Ok(text) => cmd_dist(
                &text,
                &RunOptions { precision, budget, audit, parallel, ..base },
            ),
            Err(out) => out,
        },
        Cmd::Expect { problem, precision, budget, exact, parallel } => match read(&problem) {
            Ok(text) => cmd_expect(
                &text,
                &RunOptions { precision, budget, exact, parallel, ..base },
            ),
            Err(out) => out,
        },
        Cmd::PpExpect { problem, precision, budget } => match read(&problem) {
            Ok(text) => cmd_pp_expect(&text, &RunOptions { precision, budget, ..base }),
            Err(out) => out,
        },
        Cmd::Gapfn { problem } => match read(&problem) {
            Ok(text) => cmd_gapfn(&text, &base),
            Err(out) => out,
        },
    };
    print!("{}", out.stdout);
    out.exit_code
}
