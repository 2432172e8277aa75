use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tomochaos::{exit, load_config, run, RunError, Subcommand};
use tomochaos_core::Execution;

/// Quantum chaos diagnostics for the kicked top: weak-measurement tomography,
/// random-matrix statistics, OTOCs, echoes and Krylov spreading.
#[derive(Debug, Parser)]
#[command(name = "tomochaos", version)]
struct Cli {
    /// One of tomography, rmt, otoc, echo, krylov, sweep.
    subcommand: String,
    /// Flat `key = value` configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spin quantum number j (dimension 2j+1).
    #[arg(long)]
    j: Option<String>,
    /// Twist strength, or a comma-separated list.
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<String>,
    /// Rotation angle of the kick.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Number of Floquet steps.
    #[arg(long)]
    steps: Option<String>,
    /// Standard deviation of the record noise.
    #[arg(long)]
    noise: Option<String>,
    /// Master seed (required here or in the config file).
    #[arg(long)]
    seed: Option<String>,
    /// Number of random initial states.
    #[arg(long)]
    states: Option<String>,
    /// Jx, Jy, Jz or random-hermitian.
    #[arg(long)]
    observable: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG as u8 } else { 0 });
        }
    };
    if let Err(e) = cli.subcommand.parse::<Subcommand>() {
        eprintln!("error: {e}");
        return ExitCode::from(exit::CONFIG as u8);
    }
    let mut overrides = vec![("subcommand", cli.subcommand.clone())];
    for (key, value) in [
        ("j", &cli.j),
        ("lambda", &cli.lambda),
        ("alpha", &cli.alpha),
        ("n_steps", &cli.steps),
        ("noise_spread", &cli.noise),
        ("seed", &cli.seed),
        ("n_states", &cli.states),
        ("observable", &cli.observable),
        ("output_dir", &cli.out),
    ] {
        if let Some(v) = value {
            overrides.push((key, v.clone()));
        }
    }
    let cfg = match load_config(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    match run(&cfg, Execution::default()) {
        Ok(outcome) if outcome.failed_tasks == 0 => {
            println!("wrote results to {}", cfg.output_dir.display());
            ExitCode::from(exit::SUCCESS as u8)
        }
        Ok(outcome) => {
            eprintln!(
                "error: {} task(s) failed; see {}",
                outcome.failed_tasks,
                cfg.output_dir.join("manifest.json").display()
            );
            ExitCode::from(exit::NUMERICAL as u8)
        }
        Err(e @ RunError::Setup(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::NUMERICAL as u8)
        }
        Err(e @ RunError::Io(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::IO as u8)
        }
    }
}
