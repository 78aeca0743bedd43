use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use isabc_core::harness::{format_rows, run_point, run_sweep, PointContext, Scenario, SweepPoint, SweepSpec, CSV_HEADER};
use isabc_core::params::SYSTEM_KEYS;
use isabc_core::{selftest, SystemConfig};

#[derive(Parser)]
#[command(name = "isabc-sim", version, about = "OFDM-AFDM backscatter and sensing Monte-Carlo simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and append one CSV block per point.
    Run {
        /// Base configuration (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Sweep description: `trials`, optional `seed`, `sweep.<key> = a, b, ...`.
        #[arg(long)]
        sweep: PathBuf,
        /// Results file; completed points already present are skipped.
        #[arg(long)]
        out: PathBuf,
        /// Master seed, overriding the sweep file.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the fast invariant suite.
    Selftest,
    /// Simulate one operating point and print its metrics as CSV.
    Point {
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
        /// Extra `key=value` overrides (system or scenario keys).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

fn workers(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from))
}

fn run(config: PathBuf, sweep: PathBuf, out: PathBuf, seed: Option<u64>, n_workers: Option<usize>) -> anyhow::Result<()> {
    let config_text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
    let sweep_text = std::fs::read_to_string(&sweep).with_context(|| format!("reading {}", sweep.display()))?;
    let mut spec = SweepSpec::parse(&config_text, &sweep_text)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let summary = run_sweep(&spec, &out, workers(n_workers))?;
    eprintln!(
        "{} points run, {} already complete, results in {}",
        summary.points_run,
        summary.points_skipped,
        out.display()
    );
    Ok(())
}

fn point(
    snr_db: Option<f64>,
    alpha: Option<f64>,
    trials: usize,
    seed: u64,
    n_workers: Option<usize>,
    sets: &[String],
) -> anyhow::Result<()> {
    let mut sys = SystemConfig::table1_map();
    let mut scenario = Scenario::default();
    let mut apply = |key: &str, value: &str| -> anyhow::Result<()> {
        if SYSTEM_KEYS.contains(&key) {
            match key {
                "snr_db" => sys.remove("noise_var"),
                "noise_var" => sys.remove("snr_db"),
                _ => None,
            };
            sys.set(key, value);
        } else {
            scenario.set(key, value)?;
        }
        Ok(())
    };
    if let Some(v) = snr_db {
        apply("snr_db", &v.to_string())?;
    }
    if let Some(v) = alpha {
        apply("alpha", &v.to_string())?;
    }
    for s in sets {
        let Some((k, v)) = s.split_once('=') else {
            bail!("`--set {s}` is not of the form key=value");
        };
        apply(k.trim(), v.trim())?;
    }
    let cfg = SystemConfig::from_map(&sys)?;
    let ctx = PointContext::new(&cfg, &scenario)?;
    let pool = rayon_pool(workers(n_workers))?;
    let result = run_point(&ctx, trials, seed, 0, Some(&pool))?;
    let sp = SweepPoint {
        id: 0,
        overrides: Vec::new(),
        cfg,
        scenario,
    };
    print!("{CSV_HEADER}\n{}", format_rows(&sp, &result, seed));
    Ok(())
}

fn rayon_pool(n: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build()?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            sweep,
            out,
            seed,
            workers,
        } => run(config, sweep, out, seed, workers),
        Command::Selftest => {
            let checks = selftest::run();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(anyhow::anyhow!("self-test failed"))
            }
        }
        Command::Point {
            snr_db,
            alpha,
            trials,
            seed,
            workers,
            sets,
        } => point(snr_db, alpha, trials, seed, workers, &sets),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
