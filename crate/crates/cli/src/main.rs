use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thinsw_cli::error::EXIT_USAGE;
use thinsw_cli::{run, validate_file, Stage};

#[derive(Parser)]
#[command(
    name = "thinsw",
    version,
    about = "Thin-layer shallow-water verification studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the shallow-water system and record diagnostics.
    Sw(RunArgs),
    /// Ansatz coefficients at the evaluation time.
    Ansatz(RunArgs),
    /// Residual norms for every ε.
    Residuals(RunArgs),
    /// Residual order study with fits, term breakdown and refinement check.
    Study(RunArgs),
    /// Korn pencil sweep over (M, σ).
    Korn(RunArgs),
    /// Thin-strip elliptic mode solves and the divergence lift.
    Laplace(RunArgs),
    /// Randomized ε-uniformity probes.
    Probe(RunArgs),
    /// Lagrangian chart and its identities.
    Lagrangian(RunArgs),
    /// Every pipeline in sequence.
    All(RunArgs),
    /// Report config violations without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let (stage, args) = match cli.command {
        Command::Validate { config } => return validate(&config),
        Command::Sw(a) => (Stage::Sw, a),
        Command::Ansatz(a) => (Stage::Ansatz, a),
        Command::Residuals(a) => (Stage::Residuals, a),
        Command::Study(a) => (Stage::Study, a),
        Command::Korn(a) => (Stage::Korn, a),
        Command::Laplace(a) => (Stage::Laplace, a),
        Command::Probe(a) => (Stage::Probe, a),
        Command::Lagrangian(a) => (Stage::Lagrangian, a),
        Command::All(a) => (Stage::All, a),
    };
    match run(stage, &args.config, args.out.as_deref(), args.threads) {
        Ok((dir, manifest)) => {
            println!(
                "{}: wrote {} files to {}",
                stage.name(),
                manifest.files.len() + 1,
                dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn validate(path: &std::path::Path) -> ExitCode {
    match validate_file(path) {
        Ok(v) if v.is_empty() => {
            println!("valid");
            ExitCode::SUCCESS
        }
        Ok(v) => {
            for item in &v {
                println!("{item}");
            }
            ExitCode::from(thinsw_cli::error::EXIT_VALIDATION as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
