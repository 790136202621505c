//! `steplab` command-line front end.
//!
//! Every subcommand validates its whole configuration before computing
//! anything, builds its artifacts in memory and writes them into one run
//! directory together with a snapshot of the resolved configuration.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use commands::{prepare, prepare_report, Job};
use config::{CommandKind, ExperimentConfig, Overrides};
pub use error::CliError;

pub const OUT_ENV: &str = "STEPLAB_OUT";

#[derive(Debug, Parser)]
#[command(name = "steplab", version, about = "Heavy-ball momentum experiments on quadratics and toy networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Experiment config file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Shipped preset to use instead of a config file.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    pub preset: Option<String>,
    /// Overrides the experiment seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; one directory per run is created inside it.
    #[arg(long, global = true, env = OUT_ENV, default_value = "runs")]
    pub out: PathBuf,
    /// Worker threads for parallel runs.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Validate and print the run plan without computing anything.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Iteration budget of quadratic runs.
    #[arg(long, global = true)]
    pub iterations: Option<usize>,
    /// Epoch budget.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune and trace heavy ball on an ill-conditioned quadratic.
    QuadraticDemo,
    /// Train one schedule, or one run per momentum with [compare].
    Train,
    /// Match learning rates across momentum values.
    Equivalence,
    /// Grid, random or transition-epoch sweep.
    Sweep,
    /// Summaries and plots from trace or sweep CSV files.
    Report {
        /// Trace or sweep CSV files.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Name of the output directory.
        #[arg(long, default_value = "report")]
        name: String,
    },
    /// List shipped presets.
    Presets,
}

/// Outcome of a successful invocation.
#[derive(Debug)]
pub enum Outcome {
    Plan(String),
    Written { dir: PathBuf, files: Vec<PathBuf> },
    Text(String),
}

fn load_config(g: &GlobalArgs, command: CommandKind) -> Result<ExperimentConfig, CliError> {
    let mut c = match (&g.config, &g.preset) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) if command == CommandKind::QuadraticDemo => ExperimentConfig::preset("fig2")?,
        (None, None) => {
            return Err(CliError::config(format!(
                "`{}` needs --config or --preset",
                command.as_str()
            )))
        }
    };
    c.apply(&Overrides {
        seed: g.seed,
        iterations: g.iterations,
        epochs: g.epochs,
    })?;
    Ok(c)
}

/// Validates the invocation into a job without running it.
pub fn plan(cli: &Cli) -> Result<Option<Job>, CliError> {
    let g = &cli.global;
    if g.jobs == Some(0) {
        return Err(CliError::config("--jobs must be >= 1"));
    }
    let kind = match &cli.command {
        Command::QuadraticDemo => CommandKind::QuadraticDemo,
        Command::Train => CommandKind::Train,
        Command::Equivalence => CommandKind::Equivalence,
        Command::Sweep => CommandKind::Sweep,
        Command::Report { inputs, name } => return prepare_report(inputs.clone(), name, &g.out).map(Some),
        Command::Presets => return Ok(None),
    };
    prepare(kind, load_config(g, kind)?, &g.out).map(Some)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let Some(job) = plan(cli)? else {
        return Ok(Outcome::Text(presets::names().join("\n") + "\n"));
    };
    if cli.global.dry_run {
        return Ok(Outcome::Plan(job.plan.render()));
    }
    let artifacts = steplab::sweep::with_jobs(cli.global.jobs, || job.execute()).map_err(CliError::from_config)??;
    let files = artifacts.write_all(&job.plan.run_dir)?;
    Ok(Outcome::Written {
        dir: job.plan.run_dir.clone(),
        files,
    })
}
