//! The `gridtune` command line: `optimize`, `simulate` and `eval`.
//!
//! Failures print one line, `error: <code>: <message>`, and exit with
//! 2 (config), 3 (simulation), 4 (checkpoint mismatch) or 1 (anything else).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, ConfigError, Overrides, ParamsFile, Prepared, Problem, RunConfig};
use crate::export::{self, Manifest, RunDir};
use crate::orchestrator::{self, Checkpoint, Oracle, RunError, RunSettings};

#[derive(Debug, Parser)]
#[command(name = "gridtune", version, about = "Zeroth-order tuning of inverter control parameters")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the optimizer and write a run directory.
    Optimize(OptimizeArgs),
    /// Simulate one scenario and write its frequency trajectory.
    Simulate(SimulateArgs),
    /// Print the aggregate objective at a parameter set.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Plain projected steps instead of Adam.
    #[arg(long)]
    pub no_adam: bool,
    /// Directions per iteration.
    #[arg(long = "batch")]
    pub batch: Option<usize>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<u64>,
    /// Continue from a checkpoint written by an earlier run of the same config.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// A parameter file, or `initial` for the catalog values.
    #[arg(long)]
    pub params: String,
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// A parameter file, or `initial` for the catalog values.
    #[arg(long)]
    pub params: String,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Simulation(String),
    CheckpointMismatch(String),
    Other(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Simulation(_) => 3,
            Failure::CheckpointMismatch(_) => 4,
            Failure::Other(_) => 1,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Failure::Config(_) => "config",
            Failure::Simulation(_) => "simulation",
            Failure::CheckpointMismatch(_) => "checkpoint_mismatch",
            Failure::Other(_) => "io",
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let msg = match self {
            Failure::Config(m) | Failure::Simulation(m) | Failure::CheckpointMismatch(m) | Failure::Other(m) => m,
        };
        // one line, whatever the source message looks like
        write!(f, "error: {}: {}", self.code(), msg.replace('\n', " "))
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::CheckpointMismatch { .. } => Failure::CheckpointMismatch(e.to_string()),
            RunError::Oracle { ref checkpoint, .. } => {
                let msg = match checkpoint {
                    Some(path) => format!("{e}; resume from {}", path.display()),
                    None => e.to_string(),
                };
                Failure::Simulation(msg)
            }
            RunError::Settings(_) | RunError::Zo(_) => Failure::Config(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

/// Worker count: the config value (0 means all cores), capped by `GRIDTUNE_THREADS`.
pub fn worker_count(configured: usize, env: Option<&str>) -> Result<usize, Failure> {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let base = if configured == 0 { cores } else { configured };
    match env {
        None => Ok(base),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(cap) if cap > 0 => Ok(base.min(cap)),
            _ => Err(Failure::Config(format!("GRIDTUNE_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn env_threads() -> Option<String> {
    std::env::var("GRIDTUNE_THREADS").ok()
}

fn point_from(source: &str, prepared: &Prepared) -> Result<Vec<f64>, Failure> {
    if source == "initial" {
        return Ok(prepared.x0.clone());
    }
    let file = ParamsFile::load(source)?;
    Ok(file.to_point(prepared.oracle.space(), &prepared.x0)?)
}

/// What `optimize` produced.
#[derive(Debug)]
pub struct OptimizeReport {
    pub run_dir: PathBuf,
    pub outcome: orchestrator::RunOutcome,
}

pub fn optimize(args: &OptimizeArgs) -> Result<OptimizeReport, Failure> {
    let mut config = load_config(&args.config)?;
    let threads = env_threads();
    let overrides = Overrides {
        seed: Some(args.seed),
        batch_size: args.batch,
        max_iterations: args.max_iter,
        no_adam: args.no_adam,
        parallelism: None,
    };
    let applied = config.apply(&overrides);
    config.validate()?;
    let prepared = config.prepare()?;
    let workers = worker_count(config.parallelism, threads.as_deref())?;

    let dir = RunDir::create(&args.out, config.seed)?;
    let mut settings = RunSettings::new(config.hyperparameters, config.seed);
    settings.parallelism = workers;
    settings.checkpoint_dir = config.log.checkpoints.then(|| dir.checkpoints());

    let outcome = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            orchestrator::resume(&prepared.oracle, &prepared.x0, ck, &settings)?
        }
        None => orchestrator::run(&prepared.oracle, &prepared.x0, &settings)?,
    };

    write_run(&dir, &args.config, &config, applied, workers, &prepared, &outcome, args.resume.clone())?;
    Ok(OptimizeReport { run_dir: dir.path().to_path_buf(), outcome })
}

#[allow(clippy::too_many_arguments)]
fn write_run(
    dir: &RunDir,
    config_path: &Path,
    config: &RunConfig,
    overrides: Vec<String>,
    workers: usize,
    prepared: &Prepared,
    outcome: &orchestrator::RunOutcome,
    resumed_from: Option<PathBuf>,
) -> Result<(), Failure> {
    let space = prepared.oracle.space();
    let names = prepared.oracle.scenario_names();
    export::write_iterations(std::fs::File::create(dir.file("iterations.csv"))?, &outcome.records)?;
    export::write_params_trend(
        std::fs::File::create(dir.file("params_trend.csv"))?,
        space,
        &outcome.records,
        &outcome.x,
    )?;
    export::write_scenario_values(std::fs::File::create(dir.file("scenario_values.csv"))?, &names, &outcome.records)?;
    ParamsFile::from_point(space, &outcome.x).save(dir.file("final_params.json"))?;
    if let (Some(grid), true) = (prepared.oracle.grid(), config.log.trajectories) {
        for (s, name) in names.iter().enumerate() {
            for (label, x) in [("initial", &prepared.x0), ("final", &outcome.x)] {
                let traj = grid.simulate_scenario(x, s).map_err(|e| Failure::Simulation(e.to_string()))?;
                export::write_trajectory(dir.trajectories().join(format!("{name}_{label}.csv")), &traj)?;
            }
        }
    }
    let manifest = Manifest::new(config_path, config, overrides, workers, space, names, outcome, resumed_from);
    export::write_json(dir.file("manifest.json"), &manifest)?;
    Ok(())
}

/// Writes `<out>/<scenario>.csv` and returns its path.
pub fn simulate(args: &SimulateArgs) -> Result<PathBuf, Failure> {
    let config = load_config(&args.config)?;
    if !matches!(config.problem, Problem::Grid(_)) {
        return Err(Failure::Config("problem.kind: simulate needs a grid problem".into()));
    }
    let prepared = config.prepare()?;
    let grid = prepared.oracle.grid().expect("grid problem");
    let Some(index) = grid.scenarios().scenarios().iter().position(|s| s.name == args.scenario) else {
        let known: Vec<String> = prepared.oracle.scenario_names();
        return Err(Failure::Config(format!("--scenario: unknown scenario {:?}, known: {known:?}", args.scenario)));
    };
    let x = point_from(&args.params, &prepared)?;
    let traj = grid.simulate_scenario(&x, index).map_err(|e| Failure::Simulation(e.to_string()))?;
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("{}.csv", args.scenario));
    export::write_trajectory(&path, &traj)?;
    Ok(path)
}

/// Aggregate objective at the given parameters.
pub fn eval(args: &EvalArgs) -> Result<f64, Failure> {
    let config = load_config(&args.config)?;
    let prepared = config.prepare()?;
    let x = point_from(&args.params, &prepared)?;
    let workers = worker_count(config.parallelism, env_threads().as_deref())?;
    let (total, _) = orchestrator::evaluate(&prepared.oracle, &x, workers)?;
    Ok(total)
}

/// Runs a parsed command, printing results to stdout. Returns the exit code.
pub fn dispatch(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Optimize(args) => optimize(&args).map(|report| {
            let o = &report.outcome;
            println!("run directory: {}", report.run_dir.display());
            println!("stop: {:?} after {} iterations, {} simulations", o.stop, o.records.len(), o.total_simulations());
            if let (Some(first), Some(last)) = (o.records.first().and_then(|r| r.f), o.final_objective) {
                println!("objective: {first:?} -> {last:?}");
            }
        }),
        Command::Simulate(args) => simulate(&args).map(|path| println!("{}", path.display())),
        Command::Eval(args) => eval(&args).map(|v| println!("{v:?}")),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("{f}");
            f.exit_code()
        }
    }
}
