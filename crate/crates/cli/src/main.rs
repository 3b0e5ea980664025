use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hpcloud_cli::{
    cmd_convergence, cmd_dump_matrices, cmd_solve, cmd_sweep, load_config, CliResult, OUTPUT_DIR_ENV,
};

/// hp-cloud solver for the radial Coulomb-Dirac spectrum.
#[derive(Parser)]
#[command(name = "hpcloud", version)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once; writes solve.csv and solve.json.
    Solve {
        /// Configuration overrides, `key=value`.
        overrides: Vec<String>,
    },
    /// Solve once per value of one parameter; writes sweep_<param>.csv.
    Sweep {
        /// One of nu, eps, n_intervals, quadrature_factor, method.
        #[arg(long)]
        vary: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        overrides: Vec<String>,
    },
    /// Per-level convergence rates over several n; writes convergence.csv.
    Convergence {
        /// Comma-separated interval counts (at least three).
        #[arg(long, value_delimiter = ',', required = true)]
        n_values: Vec<usize>,
        overrides: Vec<String>,
    },
    /// Writes weak-form matrices, assembled blocks and tau as text files.
    DumpMatrices { overrides: Vec<String> },
}

fn run(cli: Cli) -> CliResult<()> {
    let env_output = std::env::var(OUTPUT_DIR_ENV).ok();
    let overrides = match &cli.command {
        Command::Solve { overrides }
        | Command::Sweep { overrides, .. }
        | Command::Convergence { overrides, .. }
        | Command::DumpMatrices { overrides } => overrides,
    };
    let cfg = load_config(cli.config.as_deref(), env_output.as_deref(), overrides)?;
    let written = match &cli.command {
        Command::Solve { .. } => cmd_solve(&cfg)?,
        Command::Sweep { vary, values, .. } => cmd_sweep(&cfg, vary, values)?,
        Command::Convergence { n_values, .. } => cmd_convergence(&cfg, n_values)?,
        Command::DumpMatrices { .. } => cmd_dump_matrices(&cfg)?,
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hpcloud: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
