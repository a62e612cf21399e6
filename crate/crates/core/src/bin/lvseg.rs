use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lvseg::cli::{parse_config, run, Command};

#[derive(Parser)]
#[command(name = "lvseg", version, about = "Segregation limits of competing Lotka-Volterra systems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the single-species problem on each ball.
    SolveBaseline(Common),
    /// Baselines plus the nondegeneracy margin of each.
    NdCheck(Common),
    /// Full continuation in the competition rate.
    Continue(Common),
    /// Continuation followed by the uniqueness probe at the final rate.
    ProbeUniqueness(Common),
    /// Grid-refinement study of the discrete Laplacian on the unit square.
    ConvergenceStudy(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output.directory`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::SolveBaseline(a) => (Command::SolveBaseline, a),
        Sub::NdCheck(a) => (Command::NdCheck, a),
        Sub::Continue(a) => (Command::Continue, a),
        Sub::ProbeUniqueness(a) => (Command::ProbeUniqueness, a),
        Sub::ConvergenceStudy(a) => (Command::ConvergenceStudy, a),
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = args.out {
        config.output.directory = out.to_string_lossy().into_owned();
    }
    let (summary, _) = run(&config, command);
    match &summary.failure {
        None => {
            println!("ok: results in {}", config.output.directory);
            ExitCode::SUCCESS
        }
        Some(f) => {
            match f.kappa {
                Some(k) => eprintln!("{} failed at kappa = {k}: {}", f.stage.name(), f.message),
                None => eprintln!("{} failed: {}", f.stage.name(), f.message),
            }
            ExitCode::FAILURE
        }
    }
}
