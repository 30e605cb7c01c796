//! `dualnav`: run, sweep, render, and generate scenarios for the dual
//! fast/slow navigation harness.
//!
//! Every run writes deterministic outputs (metrics tables, per-episode
//! trajectory logs, SVG renderings) under `--out`; only `timings.csv`
//! carries wall-clock numbers. The process exits nonzero as soon as any
//! scenario fails to load or any output fails to land.

mod config;
mod gen;
mod render;
mod run;
mod scenarios;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualnav_core::scenario_gen::GenError;
use dualnav_core::scheduler::{Parallelism, ScheduleError};
use dualnav_core::trajectory::TrajectoryError;
use thiserror::Error;

use config::{ConfigError, Effective, FileConfig, FlagOverrides, ModeChoice, PolicyChoice};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenarios(#[from] scenarios::ScenarioSetError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Metrics(#[from] dualnav_core::metrics::MetricsError),
    #[error(transparent)]
    Export(#[from] dualnav_core::export::ExportError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error("cannot serialize metrics: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot read {path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot render {path}: {source}")]
    Log {
        path: PathBuf,
        #[source]
        source: TrajectoryError,
    },
    #[error("no .jsonl trajectory logs under {0}")]
    NoLogs(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Parser)]
#[command(
    name = "dualnav",
    version,
    about = "Deterministic dual fast/slow navigation harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes and write metrics, trajectory logs, and SVGs.
    Run(RunArgs),
    /// Compare fast-only, slow-only, and dual rows over a cadence sweep.
    Sweep(SweepArgs),
    /// Re-render SVGs from saved trajectory logs.
    Render(RenderArgs),
    /// Generate maze scenario files.
    Gen(GenArgs),
}

/// Flags shared by `run` and `sweep`.
#[derive(Args)]
struct CommonArgs {
    /// Scenario JSON file, or a directory of them.
    #[arg(long)]
    scenario: PathBuf,
    /// JSON config file; flags given here override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Slow-planner backend.
    #[arg(long, value_enum)]
    policy: Option<PolicyChoice>,
    /// Fast actions per planner request.
    #[arg(long)]
    ratio: Option<u32>,
    /// Fast actions a planner reply stays in flight.
    #[arg(long)]
    latency: Option<u32>,
    /// Wrong-branch probability of the scripted fast policy.
    #[arg(long)]
    p_err: Option<f64>,
    /// View-pruning cosine similarity threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Waypoint interpolation spacing in meters.
    #[arg(long)]
    d: Option<f64>,
    /// host:port of the remote planner (remote policy only).
    #[arg(long)]
    endpoint: Option<String>,
    /// Episode seed; repeat the flag for several.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run episodes one at a time instead of across the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl CommonArgs {
    fn overrides(&self, mode: Option<ModeChoice>) -> FlagOverrides {
        FlagOverrides {
            policy: self.policy,
            mode,
            ratio: self.ratio,
            latency: self.latency,
            p_err: self.p_err,
            tau: self.tau,
            spacing_m: self.d,
            endpoint: self.endpoint.clone(),
            seeds: self.seed.clone(),
        }
    }

    fn effective(&self, mode: Option<ModeChoice>) -> Result<Effective, CliError> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Effective::merge(&self.overrides(mode), &file)?)
    }

    fn parallelism(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Which systems drive the episode.
    #[arg(long, value_enum)]
    mode: Option<ModeChoice>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Dual-row cadence ratios; repeat the flag for several.
    #[arg(long = "sweep-ratio", default_values_t = [10u32, 20, 30])]
    sweep_ratios: Vec<u32>,
}

#[derive(Args)]
struct RenderArgs {
    /// Trajectory log file, or a directory of them.
    #[arg(long)]
    log: PathBuf,
    /// Output directory for the SVGs.
    #[arg(long, default_value = "rendered")]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    /// Seed of the first maze; later mazes use consecutive seeds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// How many mazes to generate.
    #[arg(long, default_value_t = 1)]
    count: u32,
    /// Maze side length in cells, odd.
    #[arg(long)]
    size: Option<usize>,
    /// Open rooms carved over the corridor.
    #[arg(long)]
    rooms: Option<usize>,
    /// Corridor width in cells.
    #[arg(long)]
    width: Option<usize>,
    /// Junction count of the corridor skeleton.
    #[arg(long)]
    junctions: Option<usize>,
    /// Minimum start-to-goal geodesic distance in meters.
    #[arg(long)]
    min_geodesic: Option<f64>,
    /// Grid resolution in meters per cell.
    #[arg(long)]
    resolution: Option<f64>,
    /// Output directory for the scenario files.
    #[arg(long, default_value = "scenarios")]
    out: PathBuf,
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => {
            let eff = args.common.effective(args.mode)?;
            eff.announce();
            let episodes = scenarios::load_set(&args.common.scenario)?;
            run::execute(&episodes, &eff, &args.common.out, args.common.parallelism())?;
            Ok(())
        }
        Command::Sweep(args) => {
            let eff = args.common.effective(None)?;
            eff.announce();
            let episodes = scenarios::load_set(&args.common.scenario)?;
            sweep::execute(
                &episodes,
                &eff,
                &args.sweep_ratios,
                &args.common.out,
                args.common.parallelism(),
            )?;
            Ok(())
        }
        Command::Render(args) => render::execute(&args.log, &args.out),
        Command::Gen(args) => {
            let params = gen::GenParams {
                seed: args.seed,
                count: args.count,
                size: args.size,
                rooms: args.rooms,
                width: args.width,
                junctions: args.junctions,
                min_geodesic: args.min_geodesic,
                resolution: args.resolution,
            };
            gen::execute(&params, &args.out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
