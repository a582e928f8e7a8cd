use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdasim::config::{parse_config, SimConfig};
use cdasim::kernel::run;
use cdasim::output::{emit_outputs, Manifest};
use clap::Parser;
use rayon::prelude::*;

/// Simulate a continuous double auction with ZI and HBL traders.
#[derive(Debug, Parser)]
#[command(name = "cdasim", version)]
struct Args {
    /// TOML config file. Every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding market.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run every seed in a half-open range `a..b`, each into `<out>/seed-<n>`.
    #[arg(long, value_parser = parse_range, conflicts_with = "seed")]
    sweep_seeds: Option<Range<u64>>,
    /// Write estimator.csv with every belief update.
    #[arg(long)]
    trace_estimator: bool,
    /// Write decisions.csv with every agent decision.
    #[arg(long)]
    trace_decisions: bool,
    /// Also write the fundamental series to this file.
    #[arg(long)]
    fundamental_dump: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("start: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("end: {e}"))?;
    if a >= b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok(a..b)
}

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;

fn load_config(args: &Args) -> Result<(SimConfig, Vec<String>), String> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => String::new(),
    };
    let (mut config, _) = parse_config(&text).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        config.market.seed = seed;
    }
    config.output.trace_estimator |= args.trace_estimator;
    config.output.trace_decisions |= args.trace_decisions;
    if args.fundamental_dump.is_some() {
        config.output.fundamental_dump = args.fundamental_dump.clone();
    }
    let warnings = config.validate().map_err(|e| e.to_string())?;
    Ok((config, warnings))
}

/// Runs one simulation and writes its outputs; returns the exit code.
fn run_one(config: &SimConfig, warnings: &[String], out: &Path) -> u8 {
    match run(config) {
        Ok(result) => match emit_outputs(&result, config, warnings, out) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
        Err(e) if e.is_config_error() => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("error: seed {}: {e}", config.market.seed);
            if let Err(io) = Manifest::for_failure(config, &e.to_string(), warnings).write(out) {
                eprintln!("error: {io}");
            }
            EXIT_INVARIANT
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (config, warnings) = match load_config(&args) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let code = match &args.sweep_seeds {
        None => run_one(&config, &warnings, &args.out),
        Some(seeds) => seeds
            .clone()
            .into_par_iter()
            .map(|seed| {
                let mut config = config.clone();
                config.market.seed = seed;
                if let Some(dump) = &config.output.fundamental_dump {
                    let name = format!(
                        "seed-{seed}-{}",
                        dump.file_name().unwrap_or_default().to_string_lossy()
                    );
                    config.output.fundamental_dump = Some(dump.with_file_name(name));
                }
                run_one(&config, &warnings, &args.out.join(format!("seed-{seed}")))
            })
            .max()
            .unwrap_or(0),
    };
    ExitCode::from(code)
}
