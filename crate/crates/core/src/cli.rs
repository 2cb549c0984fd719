//! Command-line front end: `run`, `validate`, `trace` and `dump-landscape`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{self, SEED_ENV_VAR};
use crate::engine::{run_replication, RecordMode, SimConfig};
use crate::error::{Error, Result};
use crate::experiment::{execute, validate_dir, RunPlan};
use crate::landscape::{Landscape, LandscapeKind};
use crate::output::write_trace;
use crate::signatures::{Arm, Status};

#[derive(Debug, Parser)]
#[command(
    name = "bias-sim",
    version,
    about = "Simulate collective search with learned social influence and mentorship",
    after_help = "Any configuration key can also be set with --<dotted.key>=<value>, e.g. --intervention.start_iteration=60."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every environment × arm batch and write trajectories, summary and manifest.
    Run(RunArgs),
    /// Recompute the trajectory checks from a result directory.
    Validate(ValidateArgs),
    /// Write the per-agent NDJSON trace of one replication.
    Trace(TraceArgs),
    /// Write a landscape grid as CSV (col,row,value) or JSON.
    DumpLandscape(DumpArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; takes precedence over BIAS_SIM_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration override KEY=VALUE (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InterventionArms {
    On,
    Off,
    Both,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Environment to run (repeatable). Default: all three, or the
    /// configured landscape.kind when one is set.
    #[arg(long = "env", value_parser = parse_kind)]
    envs: Vec<LandscapeKind>,
    /// Replications per environment and arm.
    #[arg(long)]
    reps: Option<usize>,
    /// Iterations per replication.
    #[arg(long)]
    iters: Option<usize>,
    /// Which arms to run.
    #[arg(long, value_enum, default_value = "both")]
    intervention: InterventionArms,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    /// Directory written by `run`.
    out_dir: PathBuf,
    /// Intervention onset iteration; defaults to the manifest's value.
    #[arg(long)]
    onset: Option<usize>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long = "env", value_parser = parse_kind)]
    env: Option<LandscapeKind>,
    #[arg(long, default_value_t = 0)]
    replication: usize,
    #[arg(long)]
    iters: Option<usize>,
    /// Output NDJSON file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long = "env", value_parser = parse_kind)]
    env: LandscapeKind,
    #[arg(long, default_value_t = 1000)]
    width: usize,
    #[arg(long, default_value_t = 1000)]
    height: usize,
    /// Generation seed (peak_mixture only).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; `.json` writes JSON, anything else CSV.
    #[arg(long)]
    out: PathBuf,
}

fn parse_kind(s: &str) -> std::result::Result<LandscapeKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

const CLAP_LONGS: &[&str] = &[
    "config",
    "seed",
    "set",
    "env",
    "reps",
    "iters",
    "intervention",
    "workers",
    "out",
    "onset",
    "replication",
    "width",
    "height",
    "help",
    "version",
];

/// Moves `--<key>=<value>` arguments whose key is not a regular flag into the
/// override list.
fn split_overrides(args: Vec<OsString>) -> (Vec<OsString>, Vec<(String, String)>) {
    let mut kept = Vec::new();
    let mut overrides = Vec::new();
    for arg in args {
        if let Some((key, value)) = arg
            .to_str()
            .and_then(|s| s.strip_prefix("--"))
            .and_then(|s| s.split_once('='))
        {
            if !CLAP_LONGS.contains(&key) {
                overrides.push((key.to_string(), value.to_string()));
                continue;
            }
        }
        kept.push(arg);
    }
    (kept, overrides)
}

fn resolve_config(
    args: &ConfigArgs,
    mut overrides: Vec<(String, String)>,
) -> Result<config::LoadedConfig> {
    for item in &args.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{item}`")))?;
        overrides.push((k.to_string(), v.to_string()));
    }
    let env_seed = std::env::var(SEED_ENV_VAR).ok();
    let mut loaded = config::load(args.config.as_deref(), &overrides, env_seed.as_deref())?;
    if let Some(seed) = args.seed {
        loaded.sim.master_seed = seed;
    }
    Ok(loaded)
}

fn cmd_run(args: RunArgs, overrides: Vec<(String, String)>) -> Result<i32> {
    let loaded = resolve_config(&args.config, overrides)?;
    let mut sim: SimConfig = loaded.sim;
    if let Some(r) = args.reps {
        sim.n_replications = r;
    }
    if let Some(t) = args.iters {
        sim.n_iterations = t;
    }
    let environments = if !args.envs.is_empty() {
        args.envs
    } else if loaded.kind_explicit {
        vec![sim.landscape.kind]
    } else {
        LandscapeKind::ALL.to_vec()
    };
    let arms = match args.intervention {
        InterventionArms::On => vec![Arm::Intervention],
        InterventionArms::Off => vec![Arm::Control],
        InterventionArms::Both => vec![Arm::Intervention, Arm::Control],
    };
    let plan = RunPlan {
        config: sim,
        environments,
        arms,
        workers: args.workers,
    };
    let report = execute(&plan, &args.out)?;
    for path in &report.files {
        println!("wrote {}", path.display());
    }
    for c in &report.summary.criteria {
        println!("{c}");
    }
    Ok(0)
}

fn cmd_validate(args: ValidateArgs) -> Result<i32> {
    let v = validate_dir(&args.out_dir, args.onset)?;
    println!("onset iteration {}", v.onset);
    for c in &v.criteria {
        println!("{c}");
    }
    let failed = v
        .criteria
        .iter()
        .filter(|c| c.status == Status::Fail)
        .count();
    println!(
        "{}",
        if v.passed() {
            "all checks passed".to_string()
        } else {
            format!("{failed} check(s) failed")
        }
    );
    Ok(if v.passed() { 0 } else { 1 })
}

fn cmd_trace(args: TraceArgs, overrides: Vec<(String, String)>) -> Result<i32> {
    let loaded = resolve_config(&args.config, overrides)?;
    let mut sim = loaded.sim;
    if let Some(kind) = args.env {
        sim.landscape.kind = kind;
    }
    if let Some(t) = args.iters {
        sim.n_iterations = t;
    }
    if args.replication >= sim.n_replications {
        return Err(Error::Config(format!(
            "replication {} out of range (n_replications = {})",
            args.replication, sim.n_replications
        )));
    }
    sim.record_mode = RecordMode::PerAgentTrace;
    sim.validate()?;
    let out = run_replication(&sim, args.replication)?;
    let lines = out.trace.expect("trace mode records lines");
    ensure_parent(&args.out)?;
    write_trace(&args.out, &lines)?;
    println!("wrote {} lines to {}", lines.len(), args.out.display());
    Ok(0)
}

fn cmd_dump(args: DumpArgs) -> Result<i32> {
    let landscape = Landscape::build(args.env, args.width, args.height, args.seed)?;
    ensure_parent(&args.out)?;
    if args.out.extension().is_some_and(|e| e == "json") {
        landscape.write_json(&args.out)?;
    } else {
        landscape.write_csv(&args.out)?;
    }
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
        }
        _ => Ok(()),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let (args, overrides) = split_overrides(args.into_iter().map(Into::into).collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let takes_overrides = matches!(cli.command, Command::Run(_) | Command::Trace(_));
    if !takes_overrides && !overrides.is_empty() {
        eprintln!("error: unexpected argument `--{}`", overrides[0].0);
        return 2;
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, overrides),
        Command::Validate(a) => cmd_validate(a),
        Command::Trace(a) => cmd_trace(a, overrides),
        Command::DumpLandscape(a) => cmd_dump(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
