use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use motocrash_cli::{parse_stage, run, CliError, Invocation, OUT_ENV};

/// Simulate, train and evaluate motorcycle crash detectors.
#[derive(Debug, Parser)]
#[command(name = "motocrash", version, after_help = format!("Exit codes: 0 success, 2 invalid config, 3 missing prior stage, 4 runtime failure.\nThe output root defaults to ${OUT_ENV} when neither --out nor the config sets it."))]
struct Args {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// generate, prepare, tune, train, evaluate, report or all.
    #[arg(long, default_value = "all")]
    stage: String,
    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let args = Args::parse();
    let result = (|| {
        let stage = parse_stage(&args.stage).map_err(|m| CliError::Validation(vec![m]))?;
        if let Some(j) = args.jobs {
            if j == 0 {
                return Err(CliError::Validation(vec!["--jobs must be at least 1".into()]));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        run(&Invocation {
            config: args.config.clone(),
            stage,
            out: args.out.clone(),
            seed: args.seed,
        })
    })();
    match result {
        Ok(root) => {
            println!("{}", root.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
