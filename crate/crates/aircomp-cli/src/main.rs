//! `aircomp` — experiment harness for digital over-the-air aggregation.
//!
//! Subcommands:
//! - `overhead`: per-scheme uplink time-slot calculator;
//! - `detect-bench`: synthetic superposition + detection benchmark sweeping
//!   SNR points, emitting per-trial CSV rows;
//! - `feel`: the federated learning loop with the ideal, perfect-aggregation,
//!   and over-the-air arms, one CSV row per round;
//! - `sweep`: cartesian grid over config keys, one summarized CSV row per
//!   cell.
//!
//! Every run writes a JSON manifest (resolved config, seed, source revision)
//! next to its CSV. Results land in `--out-dir`, `$AIRCOMP_OUT_DIR`, or the
//! current directory.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Digital over-the-air aggregation experiments")]
struct Cli {
    /// Flat key-value config file applied before any flag overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and manifest files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-scheme uplink time-slot counts.
    Overhead {
        /// Model-update dimension.
        #[arg(long)]
        w: u64,
        /// Quantization block length.
        #[arg(long)]
        q: u64,
        /// Sequence length.
        #[arg(long)]
        l: u64,
        /// Device population.
        #[arg(long)]
        k: u64,
        /// OFDM subcarriers.
        #[arg(long)]
        p: u64,
    },
    /// Synthetic detection benchmark over SNR points.
    DetectBench {
        /// Comma-separated SNR points in dB.
        #[arg(long)]
        snr: Option<String>,
        /// Monte-Carlo trials per SNR point.
        #[arg(long)]
        trials: Option<usize>,
        /// Blocks per trial.
        #[arg(long)]
        blocks: Option<usize>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Sequence length L.
        #[arg(long)]
        seq_len: Option<usize>,
        /// Receive antennas M.
        #[arg(long)]
        antennas: Option<usize>,
        /// Force distinct selections (unit counts).
        #[arg(long)]
        distinct: bool,
    },
    /// Federated learning rounds across the configured scheme arms.
    Feel {
        /// Comma-separated arms: ifed, pa, mdaircomp.
        #[arg(long)]
        scheme: Option<String>,
        /// Global training rounds.
        #[arg(long)]
        rounds: Option<usize>,
        /// Number of master seeds (seed, seed+1, ...).
        #[arg(long)]
        seeds: Option<usize>,
        /// Base master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cartesian grid of detection benchmarks over config keys.
    Sweep {
        /// Grid axis, `key=v1,v2,...`; repeatable.
        #[arg(long = "grid")]
        grid: Vec<String>,
        /// Monte-Carlo trials per cell.
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), String> {
    if let Some(workers) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| format!("worker pool: {e}"))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    let out_dir = commands::resolve_out_dir(cli.out_dir);

    match cli.command {
        Command::Overhead { w, q, l, k, p } => commands::run_overhead(w, q, l, k, p),
        Command::DetectBench {
            snr,
            trials,
            blocks,
            seed,
            seq_len,
            antennas,
            distinct,
        } => {
            if let Some(snr) = snr {
                cfg.set("snr_db", &snr)?;
            }
            if let Some(trials) = trials {
                cfg.set("trials", &trials.to_string())?;
            }
            if let Some(blocks) = blocks {
                cfg.set("blocks", &blocks.to_string())?;
            }
            if let Some(seed) = seed {
                cfg.set("seed", &seed.to_string())?;
            }
            if let Some(seq_len) = seq_len {
                cfg.set("seq_len", &seq_len.to_string())?;
            }
            if let Some(antennas) = antennas {
                cfg.set("antennas", &antennas.to_string())?;
            }
            if distinct {
                cfg.set("distinct", "true")?;
            }
            commands::run_detect_bench(&cfg, &out_dir)
        }
        Command::Feel {
            scheme,
            rounds,
            seeds,
            seed,
        } => {
            if let Some(scheme) = scheme {
                cfg.set("schemes", &scheme)?;
            }
            if let Some(rounds) = rounds {
                cfg.set("rounds", &rounds.to_string())?;
            }
            if let Some(seeds) = seeds {
                cfg.set("seeds", &seeds.to_string())?;
            }
            if let Some(seed) = seed {
                cfg.set("seed", &seed.to_string())?;
            }
            commands::run_feel(&cfg, &out_dir)
        }
        Command::Sweep { grid, trials, seed } => {
            if let Some(trials) = trials {
                cfg.set("trials", &trials.to_string())?;
            }
            if let Some(seed) = seed {
                cfg.set("seed", &seed.to_string())?;
            }
            let axes: Vec<(String, Vec<String>)> = grid
                .iter()
                .map(|axis| {
                    let (key, values) = axis
                        .split_once('=')
                        .ok_or_else(|| format!("bad --grid {axis:?}, expected key=v1,v2"))?;
                    Ok((
                        key.trim().to_string(),
                        values.split(',').map(|v| v.trim().to_string()).collect(),
                    ))
                })
                .collect::<Result<_, String>>()?;
            commands::run_sweep(&cfg, &axes, &out_dir)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
