use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frdvasc::check::CheckOptions;
use frdvasc::cli::{cmd_check, cmd_simulate, cmd_steady, load_config};
use frdvasc::config::RunConfig;

/// Numerical laboratory for the fluid-reaction-diffusion vasculogenesis model.
#[derive(Parser)]
#[command(name = "frdvasc", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the series equilibrium and write phi_hat.csv, rho_hat.csv, steady_report.txt.
    Steady {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a perturbed simulation and write diagnostics.csv, decay_fit.txt and snapshots.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and invariant suite.
    Check {
        /// Only `grid.n` is read from the file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, hide = true)]
        k_override: Option<f64>,
    },
}

fn configure_threads() {
    if let Some(k) = std::env::var("FRDVASC_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
}

fn main() -> ExitCode {
    configure_threads();
    let args = Args::parse();
    let result = match args.command {
        Command::Steady { config, out } => load_config(&config).and_then(|cfg| cmd_steady(&cfg, out.as_deref())),
        Command::Simulate { config, out } => load_config(&config).and_then(|cfg| cmd_simulate(&cfg, out.as_deref())),
        Command::Check {
            config,
            k_override,
        } => {
            let cfg = match config {
                Some(path) => load_config(&path),
                None => Ok(RunConfig {
                    n: CheckOptions::default().n,
                    ..RunConfig::default()
                }),
            };
            cfg.map(|cfg| cmd_check(&CheckOptions { n: cfg.n, k_override }, &mut io::stdout()))
        }
    };
    match result {
        Ok(exit) => ExitCode::from(exit.code()),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit.code())
        }
    }
}
