//! Command-line front end: `run`, `batch`, `validate` and `serve`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::batch::{run_batch, write_composition, BatchError, BatchSpec};
use crate::engine::{run, Command, CsvMetricsSink, RunError, RunOptions, RunSink, TrajectorySink};
use crate::scenario::{presets, Scenario, ScenarioError};
use crate::service::{serve_loop, ServeConfig, ServeError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "grfswarm", version, about = "Swarm molecule formation with bonding-aware potentials")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run one seed headlessly and write metrics.
    Run(RunArgs),
    /// Run many seeds and aggregate them.
    Batch(BatchArgs),
    /// Check a scenario file and report every problem.
    Validate(ConfigArg),
    /// Serve a live simulation over a web socket at /ws.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Scenario JSON file, or the name of a bundled preset.
    #[arg(long)]
    pub config: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Also write trajectory.ndjson on every metrics tick.
    #[arg(long)]
    pub trajectory: bool,
    /// NDJSON file of commands to replay, e.g. a session log.
    #[arg(long)]
    pub commands: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub ticks: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 30.0)]
    pub tick_rate: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    pub frame_stride: u64,
    #[arg(long)]
    pub session_log: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ScenarioError),
    #[error("{0}")]
    BadArgs(String),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error(transparent)]
    Serve(#[from] ServeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ScenarioError::Io { .. }) => EXIT_IO,
            CliError::Config(_) | CliError::BadArgs(_) | CliError::Run(_) => EXIT_CONFIG,
            CliError::Batch(BatchError::NoRuns) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Batch(_) => EXIT_IO,
            CliError::Serve(ServeError::Init(_)) => EXIT_CONFIG,
            CliError::Serve(_) => EXIT_IO,
        }
    }
}

/// Loads a scenario from a path, falling back to a bundled preset of the
/// same name when no such file exists.
pub fn load_config(config: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(config);
    if !path.exists() {
        if let Some(name) = Path::new(config).file_name().and_then(|n| n.to_str()) {
            if presets::by_name(name).is_some() {
                log::info!("{config} not found, using bundled preset {name}");
                return presets::load(name);
            }
        }
    }
    Scenario::from_path(path)
}

fn load_commands(path: &Path) -> Result<Vec<Command>, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let cmd = serde_json::from_str(&line)
            .map_err(|e| CliError::BadArgs(format!("{}:{}: {e}", path.display(), k + 1)))?;
        out.push(cmd);
    }
    Ok(out)
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let scenario = load_config(&args.config.config)?;
    let seed = args.seed.unwrap_or(scenario.rng_seed);
    let commands = match &args.commands {
        Some(p) => load_commands(p)?,
        None => Vec::new(),
    };
    create_dir(&args.out)?;
    let mut csv = CsvMetricsSink::new(create_file(&args.out.join("metrics.csv"))?);
    let mut traj = match args.trajectory {
        true => Some(TrajectorySink::new(create_file(&args.out.join("trajectory.ndjson"))?)),
        false => None,
    };
    let mut sinks: Vec<&mut dyn RunSink> = vec![&mut csv];
    if let Some(t) = traj.as_mut() {
        sinks.push(t);
    }
    let options = RunOptions {
        ticks: args.ticks,
        commands,
    };
    let result = run(&scenario, seed, &options, &mut sinks)?;
    if let Some(reason) = &result.aborted {
        return Err(CliError::Io {
            path: args.out.clone(),
            source: std::io::Error::other(reason.clone()),
        });
    }
    let comp_path = args.out.join("composition.json");
    let composition = result.metrics_series.last().map(|f| f.composition.clone()).unwrap_or_default();
    write_composition(&comp_path, &composition)?;
    if let Some(last) = result.metrics_series.last() {
        println!(
            "seed {seed}: tick {} molecules {} remaining_bonds {} velocity_error {:.4} ({:.1}s)",
            last.tick, last.molecule_count, last.remaining_bonds, last.velocity_error, result.wall_time
        );
    }
    Ok(())
}

pub fn cmd_batch(args: &BatchArgs) -> Result<(), CliError> {
    let scenario = load_config(&args.config.config)?;
    if args.runs == 0 {
        return Err(CliError::BadArgs("--runs must be at least 1".into()));
    }
    let spec = BatchSpec {
        scenario,
        runs: args.runs,
        base_seed: args.base_seed,
        jobs: args.jobs,
        ticks: args.ticks,
    };
    let out = run_batch(&spec, &args.out)?;
    let m = &out.manifest;
    println!(
        "{} of {} runs completed{}",
        m.completed.len(),
        m.seeds.len(),
        if m.ci_defined { "" } else { " (CI undefined)" }
    );
    if let Some(last) = out.aggregate.as_ref().and_then(|a| a.last()) {
        println!(
            "tick {}: molecules {:.2} remaining_bonds {:.2} velocity_error {:.4}",
            last.tick, last.molecule_count.mean, last.remaining_bonds.mean, last.velocity_error.mean
        );
    }
    Ok(())
}

pub fn cmd_validate(args: &ConfigArg) -> Result<(), CliError> {
    let s = load_config(&args.config)?;
    println!("ok: {} ({} robots)", s.name, s.robot_count());
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let scenario = load_config(&args.config.config)?;
    if !(args.tick_rate.is_finite() && args.tick_rate > 0.0) {
        return Err(CliError::BadArgs("--tick-rate must be > 0".into()));
    }
    let mut cfg = ServeConfig::new(scenario, SocketAddr::new(args.host, args.port));
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.tick_rate_hz = args.tick_rate;
    cfg.frame_stride = args.frame_stride.max(1);
    cfg.session_log = args.session_log.clone();
    let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
        path: PathBuf::from("<runtime>"),
        source,
    })?;
    rt.block_on(serve_loop(cfg))?;
    Ok(())
}

fn report(err: &CliError) {
    match err {
        CliError::Config(ScenarioError::Invalid(violations)) => {
            eprintln!("error: invalid scenario");
            for v in violations {
                eprintln!("  {}: {}", v.field, v.message);
            }
        }
        other => eprintln!("error: {other}"),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Batch(a) => cmd_batch(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e);
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRFSWARM_LOG", "warn")).init();
    run_cli(std::env::args_os())
}
