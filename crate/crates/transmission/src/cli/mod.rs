//! Command-line front end: configuration files, expressions and run modes.

pub mod config;
pub mod expr;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{parse_config, ConfigError, ConfigErrors, RunConfig, RunMode};
pub use expr::{parse_expression, Expr, ExprError};
pub use run::{run, ExitStatus, RunError, RunOptions, RunOutcome};

#[derive(Debug, Parser)]
#[command(
    name = "transmission",
    version,
    about = "Two-habitat transmission problem solver"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Solve even when the regime is not admissible.
    #[arg(long)]
    pub force: bool,
    /// Output directory.
    #[arg(long, default_value = "./out")]
    pub out: PathBuf,
    /// Seed of the scan sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the coefficients and evaluate the admissibility conditions.
    Check(CommonArgs),
    /// Seeded sign scan of the scalar symbols.
    Scan(CommonArgs),
    /// Solve one mode problem.
    SolveMode(CommonArgs),
    /// Solve the 2D problem by mode reduction.
    Solve(CommonArgs),
    /// Compare one mode with the finite-difference reference.
    Verify(CommonArgs),
    /// Evaluate the determinant factorization identities.
    Identities(CommonArgs),
    /// Run the mode named in the configuration's [run] section.
    Run(CommonArgs),
}

impl Command {
    fn split(&self) -> (Option<RunMode>, &CommonArgs) {
        match self {
            Command::Check(a) => (Some(RunMode::Check), a),
            Command::Scan(a) => (Some(RunMode::Scan), a),
            Command::SolveMode(a) => (Some(RunMode::SolveMode), a),
            Command::Solve(a) => (Some(RunMode::Solve), a),
            Command::Verify(a) => (Some(RunMode::Verify), a),
            Command::Identities(a) => (Some(RunMode::Identities), a),
            Command::Run(a) => (None, a),
        }
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let (mode, args) = cli.command.split();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitStatus::Usage.code();
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("error: {}: {e}", args.config.display());
            }
            return ExitStatus::Usage.code();
        }
    };
    if let Some(m) = mode {
        config.mode = m;
    }
    let opts = RunOptions {
        out: args.out.clone(),
        force: args.force,
        seed: args.seed,
        quiet: args.quiet,
    };
    match run(&config, &opts) {
        Ok(outcome) => {
            if !opts.quiet {
                for line in &outcome.summary {
                    println!("{line}");
                }
                for f in &outcome.files {
                    println!("wrote {}", f.display());
                }
            }
            outcome.status.code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.status().code()
        }
    }
}
