//! Command-line front end: `run`, `compare`, `sweep`, `cache` and `scene`.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid configuration,
//! 4 runtime failure. Errors are printed to stderr as one JSON object.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::simulator::{Policy, Regime};

pub use config::{default_config_json, load_config, ConfigFile, CONFIG_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": { "kind": self.kind(), "message": self.to_string() },
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "nbv", version, about = "Next-best-view planning on procedural scenes")]
pub struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// JSON configuration file.
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one episode and write metrics, trace and summary.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "dual")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Persistent visibility-mask cache; loaded if present, saved after.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run several policies over several scenes and aggregate per step.
    Compare {
        #[command(flatten)]
        config: ConfigArg,
        /// Comma-separated seeds or a half-open range `a..b`.
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long, default_value = "dual,geo-only,sem-only,random,uniform")]
        policies: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Vary one configuration key for a single policy.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        /// Top-level config key, e.g. `gamma`.
        #[arg(long)]
        param: String,
        /// Comma-separated JSON values.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long, default_value = "dual")]
        policy: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Manage a persistent visibility-mask cache file.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
    /// Generate a scene and write its description and occupancy.
    Scene {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the fully spelled-out default configuration for a regime.
    DefaultConfig {
        #[arg(long, value_parser = parse_regime)]
        regime: Regime,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Compute every mask a planner episode on the scene needs.
    Prewarm {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0)]
        scene_seed: u64,
        #[arg(long)]
        cache: PathBuf,
    },
    Stats {
        #[arg(long)]
        cache: PathBuf,
    },
    Clear {
        #[arg(long)]
        cache: PathBuf,
    },
}

fn parse_regime(s: &str) -> Result<Regime, String> {
    match s {
        "object" => Ok(Regime::Object),
        "scene" => Ok(Regime::Scene),
        _ => Err(format!("unknown regime '{s}'")),
    }
}

pub fn parse_policy(s: &str) -> Result<Policy, CliError> {
    Policy::parse(s.trim()).ok_or_else(|| {
        let known: Vec<_> = Policy::ALL.iter().map(|p| p.name()).collect();
        CliError::Usage(format!("unknown policy '{s}' (expected one of {})", known.join(", ")))
    })
}

pub fn parse_policies(s: &str) -> Result<Vec<Policy>, CliError> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(parse_policy).collect()
}

/// Parses `1,2,5` or `a..b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list '{s}'"));
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        return Ok((a..b).collect());
    }
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect()
}

fn parse_values(s: &str) -> Result<Vec<serde_json::Value>, CliError> {
    s.split(',')
        .map(|v| serde_json::from_str(v.trim()).map_err(|_| CliError::Usage(format!("invalid value '{v}'"))))
        .collect()
}

fn read_config_file(path: &std::path::Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

/// Executes a parsed command. Inputs are validated before any output
/// directory is created.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            policy,
            scene_seed,
            out,
            cache,
        } => {
            let policy = parse_policy(&policy)?;
            let c = load_config(&config.config)?;
            commands::cmd_run(&c, policy, scene_seed, &out, cache.as_deref())
        }
        Command::Compare {
            config,
            seeds,
            policies,
            out,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let policies = parse_policies(&policies)?;
            let c = load_config(&config.config)?;
            commands::cmd_compare(&c, &seeds, &policies, &out)
        }
        Command::Sweep {
            config,
            param,
            values,
            seeds,
            policy,
            out,
        } => {
            let seeds = parse_seeds(&seeds)?;
            let policy = parse_policy(&policy)?;
            let values = parse_values(&values)?;
            let file = read_config_file(&config.config)?;
            commands::cmd_sweep(&file, &param, &values, &seeds, policy, &out)
        }
        Command::Cache { action } => match action {
            CacheAction::Prewarm {
                config,
                scene_seed,
                cache,
            } => {
                let c = load_config(&config.config)?;
                print_json(&commands::cache_prewarm(&c, scene_seed, &cache)?);
                Ok(())
            }
            CacheAction::Stats { cache } => {
                print_json(&commands::cache_stats(&cache)?);
                Ok(())
            }
            CacheAction::Clear { cache } => {
                let removed = commands::cache_clear(&cache)?;
                print_json(&serde_json::json!({ "path": cache.display().to_string(), "removed": removed }));
                Ok(())
            }
        },
        Command::Scene {
            config,
            scene_seed,
            out,
        } => {
            let c = load_config(&config.config)?;
            commands::cmd_scene(&c, scene_seed, &out)
        }
        Command::DefaultConfig { regime } => {
            print!("{}", default_config_json(regime));
            Ok(())
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli)),
            Err(e) => Err(CliError::Runtime(format!("thread pool: {e}"))),
        },
        None => execute(cli),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
