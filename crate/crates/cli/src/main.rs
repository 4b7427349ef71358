mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::mesh_gen::MeshKind;
use crate::config::RunConfig;
use crate::error::CliError;

/// Blood-flow simulations with duct outlet conditions, synthetic 4D flow data and duct
/// length estimation.
#[derive(Parser, Debug)]
#[command(name = "ductflow", version)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a mesh and write it as MSH 2.2.
    MeshGen {
        #[command(subcommand)]
        kind: MeshKind,
        /// Output file.
        #[arg(long, short, global = true, default_value = "mesh.msh")]
        output: PathBuf,
    },
    /// Run a simulation.
    Run {
        /// Output directory (overrides `output_dir`).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Relative velocity error between the snapshots of two runs.
    Compare {
        run_a: PathBuf,
        /// Reference run.
        run_b: PathBuf,
        /// Sampling interval in seconds.
        #[arg(long, default_value_t = 0.03)]
        stride: f64,
        /// Compare the corrected velocity of `run_a` instead of the end-of-step velocity.
        #[arg(long)]
        corrected: bool,
        /// CSV file for the error series.
        #[arg(long, short, default_value = "compare.csv")]
        output: PathBuf,
    },
    /// Sample a run into a synthetic measurement set.
    SynthMeas {
        /// Run directory to sample (overrides `measurement.trajectory`).
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Estimate duct lengths from measurements.
    Estimate {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("this command needs --config <path>".into()))?;
    RunConfig::load(path)
}

fn output_dir(arg: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    arg.or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --output or set output_dir".into()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let command_line: Vec<String> = std::env::args().collect();
    let command_line = command_line.join(" ");
    match cli.command {
        Command::MeshGen { kind, output } => commands::mesh_gen::run(&kind, &output),
        Command::Run { output } => {
            let cfg = load_config(cli.config.as_ref())?;
            let out = output_dir(output, &cfg)?;
            commands::run::run(&cfg, &out, &command_line)
        }
        Command::Compare { run_a, run_b, stride, corrected, output } => {
            commands::compare::run(&run_a, &run_b, stride, corrected, &output)
        }
        Command::SynthMeas { trajectory, output } => {
            let cfg = load_config(cli.config.as_ref())?;
            let out = output_dir(output, &cfg)?;
            commands::synth_meas::run(&cfg, trajectory.as_deref(), &out, &command_line)
        }
        Command::Estimate { output } => {
            let cfg = load_config(cli.config.as_ref())?;
            let out = output_dir(output, &cfg)?;
            commands::estimate::run(&cfg, &out, &command_line)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
