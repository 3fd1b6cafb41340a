//! `cmatorus <task> --config path.json [--seed N] [--out dir]`
//!
//! Exit status 0 on success with `summary.json` in the output directory;
//! on failure exit status 1, the error as JSON on stderr and in
//! `error.json`, and no `summary.json`.

mod config;
mod error;
mod expr;
mod tasks;

use clap::Parser;
use config::{RunConfig, Task};
use error::CliError;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tasks::{Context, Output};

#[derive(Debug, Parser)]
#[command(name = "cmatorus", version, about = "Complex Monge-Ampere experiments on Hermitian tori")]
struct Args {
    /// Task to run.
    #[arg(value_enum)]
    task: Task,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Seed for random data; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("MA_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::Threads(value.clone()))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|_| CliError::Threads(value))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn execute(args: &Args, out_dir: &mut Option<PathBuf>) -> Result<(), CliError> {
    out_dir.clone_from(&args.out);
    let config = RunConfig::load(&args.config)?;
    let dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    *out_dir = Some(dir.clone());
    if let Some(t) = config.task {
        if t != args.task {
            return Err(CliError::TaskMismatch {
                cli: args.task.name().into(),
                config: t.name().into(),
            });
        }
    }
    configure_threads()?;
    config.solver.validate()?;
    let mut out = Output::create(&dir)?;
    out.log(&format!("config {}", args.config.display()));
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = Context { config, base, seed };
    let result = tasks::run(args.task, &ctx, &mut out);
    match &result {
        Ok(summary) => {
            out.json("summary.json", summary)?;
            out.log("finished");
        }
        Err(e) => out.log(&format!("failed: {e}")),
    }
    result.map(|_| ())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut out_dir = None;
    match execute(&args, &mut out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let value = e.to_json();
            eprintln!("{value}");
            if let Some(dir) = out_dir {
                let _ = std::fs::remove_file(dir.join("summary.json"));
                if std::fs::create_dir_all(&dir).is_ok() {
                    let text = format!("{}\n", serde_json::to_string_pretty(&value).expect("json"));
                    let _ = cmatorus_core::io::write_atomic(&dir.join("error.json"), text.as_bytes());
                }
            }
            ExitCode::FAILURE
        }
    }
}
