//! Command-line experiments: argument parsing, config files, seeding and
//! report files.
//!
//! Every experiment writes `<name>.json` (canonical, sorted keys),
//! `<name>.csv` when it has a table, and `<name>.meta.json` holding the
//! timestamp and invocation, which are kept out of the report so reruns are
//! byte-identical.

mod config;
mod experiments;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

pub use config::{merge_args, merge_scalar, ExperimentConfig};
pub use experiments::*;

use crate::error::GreenError;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "greenpot-out";

/// Bad flags or config; exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Failed(GreenError),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

impl From<GreenError> for RunError {
    fn from(e: GreenError) -> Self {
        match e {
            GreenError::DimensionMismatch { .. }
            | GreenError::OutOfRange(_)
            | GreenError::OutsideDomain(_)
            | GreenError::Unsupported(_)
            | GreenError::Invalid(_)
            | GreenError::Json(_) => RunError::Usage(UsageError(e.to_string())),
            other => RunError::Failed(other),
        }
    }
}

/// Result of one experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Value,
    pub csv: Option<String>,
    pub pass: bool,
    pub summary: String,
}

#[derive(Parser, Debug)]
#[command(name = "greenpot", version, about = "Green potentials of Brownian motion and random walks")]
pub struct Cli {
    /// Base seed; each experiment derives its streams from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config with experiment flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Let config values override conflicting flags.
    #[arg(long, global = true)]
    pub force: bool,
    /// Output directory for reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Tables of the lattice Green function or potential kernel with asymptote ratios.
    LatticeGreen(LatticeGreenArgs),
    /// Killed Green matrix of a grid domain plus its potential check.
    KilledGreen(KilledGreenArgs),
    /// Classify a matrix read from JSON or CSV.
    CheckPotential(CheckPotentialArgs),
    /// Hadamard powers of random killed Green matrices.
    HadamardSweep(SweepArgs),
    /// Hadamard exponentials of random killed Green matrices.
    ExpSweep(SweepArgs),
    /// Sampled CMP inequality over random killed Green matrices.
    CmpRandom(CmpRandomArgs),
    /// Discrete CMP functional for random sign-changing functions.
    CmpFunctional(CmpFunctionalArgs),
    /// Killed lattice Green function on unit-disk grids against the disk kernel.
    ConvergeDisk(ConvergeDiskArgs),
    /// Free-space operator on a ball indicator against the continuum integral.
    ConvergeFree(ConvergeFreeArgs),
    /// Monte Carlo Riesz potential of a ball.
    RieszMc(RieszMcArgs),
    /// Walk exits from a grid domain: visit counts and the boundary term.
    ExitMc(ExitMcArgs),
    /// Dump the grid, interior or exterior points of a domain.
    DomainGrid(DomainGridArgs),
    /// Run the experiment named in the config file.
    Run,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::LatticeGreen(_) => "lattice-green",
            Command::KilledGreen(_) => "killed-green",
            Command::CheckPotential(_) => "check-potential",
            Command::HadamardSweep(_) => "hadamard-sweep",
            Command::ExpSweep(_) => "exp-sweep",
            Command::CmpRandom(_) => "cmp-random",
            Command::CmpFunctional(_) => "cmp-functional",
            Command::ConvergeDisk(_) => "converge-disk",
            Command::ConvergeFree(_) => "converge-free",
            Command::RieszMc(_) => "riesz-mc",
            Command::ExitMc(_) => "exit-mc",
            Command::DomainGrid(_) => "domain-grid",
            Command::Run => "run",
        }
    }
}

fn command_from_config(name: &str) -> Result<Command, UsageError> {
    Ok(match name {
        "lattice-green" => Command::LatticeGreen(Default::default()),
        "killed-green" => Command::KilledGreen(Default::default()),
        "check-potential" => Command::CheckPotential(Default::default()),
        "hadamard-sweep" => Command::HadamardSweep(Default::default()),
        "exp-sweep" => Command::ExpSweep(Default::default()),
        "cmp-random" => Command::CmpRandom(Default::default()),
        "cmp-functional" => Command::CmpFunctional(Default::default()),
        "converge-disk" => Command::ConvergeDisk(Default::default()),
        "converge-free" => Command::ConvergeFree(Default::default()),
        "riesz-mc" => Command::RieszMc(Default::default()),
        "exit-mc" => Command::ExitMc(Default::default()),
        "domain-grid" => Command::DomainGrid(Default::default()),
        other => return Err(UsageError(format!("unknown experiment {other:?}"))),
    })
}

fn resolve<T>(args: &T, cfg: &ExperimentConfig, force: bool) -> Result<T, UsageError>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    merge_args(args, &cfg.params, force)
}

/// Runs one resolved experiment.
pub fn dispatch(command: &Command, seed: u64) -> Result<Outcome, RunError> {
    match command {
        Command::LatticeGreen(a) => lattice_green(a),
        Command::KilledGreen(a) => killed_green(a),
        Command::CheckPotential(a) => check_potential(a, seed),
        Command::HadamardSweep(a) => hadamard_sweep(a, seed),
        Command::ExpSweep(a) => exp_sweep(a, seed),
        Command::CmpRandom(a) => cmp_random(a, seed),
        Command::CmpFunctional(a) => cmp_functional(a, seed),
        Command::ConvergeDisk(a) => converge_disk(a),
        Command::ConvergeFree(a) => converge_free(a),
        Command::RieszMc(a) => riesz_mc(a, seed),
        Command::ExitMc(a) => exit_mc(a, seed),
        Command::DomainGrid(a) => domain_grid(a),
        Command::Run => Err(UsageError("run needs --config with an experiment name".into()).into()),
    }
}

fn resolve_command(cli: &Cli, cfg: &ExperimentConfig) -> Result<Command, UsageError> {
    let force = cli.force;
    let command = match (&cli.command, &cfg.experiment) {
        (Command::Run, Some(name)) => command_from_config(name)?,
        (Command::Run, None) => return Err(UsageError("config does not name an experiment".into())),
        (c, Some(name)) if name != c.name() => {
            return Err(UsageError(format!("config is for {name:?} but {} was requested", c.name())))
        }
        (c, _) => clone_command(c),
    };
    Ok(match command {
        Command::LatticeGreen(a) => Command::LatticeGreen(resolve(&a, cfg, force)?),
        Command::KilledGreen(a) => Command::KilledGreen(resolve(&a, cfg, force)?),
        Command::CheckPotential(a) => Command::CheckPotential(resolve(&a, cfg, force)?),
        Command::HadamardSweep(a) => Command::HadamardSweep(resolve(&a, cfg, force)?),
        Command::ExpSweep(a) => Command::ExpSweep(resolve(&a, cfg, force)?),
        Command::CmpRandom(a) => Command::CmpRandom(resolve(&a, cfg, force)?),
        Command::CmpFunctional(a) => Command::CmpFunctional(resolve(&a, cfg, force)?),
        Command::ConvergeDisk(a) => Command::ConvergeDisk(resolve(&a, cfg, force)?),
        Command::ConvergeFree(a) => Command::ConvergeFree(resolve(&a, cfg, force)?),
        Command::RieszMc(a) => Command::RieszMc(resolve(&a, cfg, force)?),
        Command::ExitMc(a) => Command::ExitMc(resolve(&a, cfg, force)?),
        Command::DomainGrid(a) => Command::DomainGrid(resolve(&a, cfg, force)?),
        Command::Run => Command::Run,
    })
}

fn clone_command(c: &Command) -> Command {
    match c {
        Command::LatticeGreen(a) => Command::LatticeGreen(a.clone()),
        Command::KilledGreen(a) => Command::KilledGreen(a.clone()),
        Command::CheckPotential(a) => Command::CheckPotential(a.clone()),
        Command::HadamardSweep(a) => Command::HadamardSweep(a.clone()),
        Command::ExpSweep(a) => Command::ExpSweep(a.clone()),
        Command::CmpRandom(a) => Command::CmpRandom(a.clone()),
        Command::CmpFunctional(a) => Command::CmpFunctional(a.clone()),
        Command::ConvergeDisk(a) => Command::ConvergeDisk(a.clone()),
        Command::ConvergeFree(a) => Command::ConvergeFree(a.clone()),
        Command::RieszMc(a) => Command::RieszMc(a.clone()),
        Command::ExitMc(a) => Command::ExitMc(a.clone()),
        Command::DomainGrid(a) => Command::DomainGrid(a.clone()),
        Command::Run => Command::Run,
    }
}

/// Canonical JSON: keys sorted, full float precision, trailing newline.
pub fn canonical_json(v: &Value) -> String {
    // serde_json's map is ordered by key unless `preserve_order` is enabled
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}

fn write_outputs(dir: &Path, name: &str, outcome: &Outcome, meta: &Value) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{name}.json")), canonical_json(&outcome.report))?;
    if let Some(csv) = &outcome.csv {
        std::fs::write(dir.join(format!("{name}.csv")), csv)?;
    }
    std::fs::write(dir.join(format!("{name}.meta.json")), canonical_json(meta))
}

fn init_threads() {
    if let Some(n) = std::env::var("GREENPOT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // an existing global pool (tests) is fine
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Parses `args`, runs the experiment and returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    init_threads();
    match run(&cli, &argv) {
        Ok(pass) => {
            if pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(RunError::Usage(e)) => {
            eprintln!("greenpot: {e}");
            EXIT_USAGE
        }
        Err(RunError::Failed(e)) => {
            eprintln!("greenpot: {e}");
            EXIT_FAIL
        }
    }
}

/// Runs a parsed command line; `Ok(pass)` once reports are written.
pub fn run(cli: &Cli, argv: &[OsString]) -> Result<bool, RunError> {
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let seed = merge_scalar("seed", cli.seed, cfg.seed, cli.force)?.unwrap_or(DEFAULT_SEED);
    let out = merge_scalar("out", cli.out.clone(), cfg.out.as_ref().map(PathBuf::from), cli.force)?
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let command = resolve_command(cli, &cfg)?;
    let name = command.name();
    let outcome = dispatch(&command, seed)?;
    let created = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = json!({
        "experiment": name,
        "seed": seed,
        "created_unix": created,
        "version": env!("CARGO_PKG_VERSION"),
        "threads": rayon::current_num_threads(),
        "argv": argv.iter().map(|a| a.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "pass": outcome.pass,
    });
    write_outputs(&out, name, &outcome, &meta).map_err(|e| RunError::Failed(e.into()))?;
    println!("{name}: {} ({})", if outcome.pass { "PASS" } else { "FAIL" }, outcome.summary);
    Ok(outcome.pass)
}
