//! Experiment orchestration for the `motocrash` binary.

pub mod config;
pub mod report;
pub mod stages;
pub mod store;

use std::path::PathBuf;

use config::{ExperimentConfig, Overrides, Stage};
use store::Store;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "MOTOCRASH_OUT";
const DEFAULT_OUT: &str = "motocrash-out";

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or arguments; every problem found.
    Validation(Vec<String>),
    /// A prior stage is missing, stale or damaged.
    Dependency(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Dependency(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(v) => {
                writeln!(f, "invalid configuration ({} problem{}):", v.len(), if v.len() == 1 { "" } else { "s" })?;
                for p in v {
                    writeln!(f, "  - {p}")?;
                }
                Ok(())
            }
            CliError::Dependency(m) => write!(f, "missing prerequisite: {m}"),
            CliError::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<motocrash::Error> for CliError {
    fn from(e: motocrash::Error) -> Self {
        match e {
            motocrash::Error::Validation(m) => CliError::Validation(vec![m]),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

/// What to run, after argument parsing.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: PathBuf,
    /// `None` runs every stage.
    pub stage: Option<Stage>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// `--out`, then the config's `out`, then the environment, then a fixed default.
pub fn output_root(cli: Option<&PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    cli.cloned()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn run(inv: &Invocation) -> Result<PathBuf, CliError> {
    let cfg = ExperimentConfig::load(&inv.config, &Overrides { seed: inv.seed })?;
    let root = output_root(inv.out.as_ref(), &cfg);
    let store = Store::new(root.clone());
    log::info!("output root {}", root.display());
    match inv.stage {
        Some(s) => stages::run_stage(&cfg, &store, s)?,
        None => {
            for s in Stage::ALL {
                stages::run_stage(&cfg, &store, s)?;
            }
        }
    }
    Ok(root)
}

pub fn parse_stage(s: &str) -> Result<Option<Stage>, String> {
    if s == "all" {
        return Ok(None);
    }
    Stage::ALL
        .into_iter()
        .find(|st| st.name() == s)
        .map(Some)
        .ok_or_else(|| format!("unknown stage `{s}` (generate, prepare, tune, train, evaluate, report, all)"))
}
