//! Subcommand implementations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aircomp::feel::{self, RoundRecord};
use aircomp::metrics::{self, collision_stats, nmse_db};
use aircomp::modcodebook::ModCodebook;
use aircomp::sim::{run_trial, TrialResult};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| format!("mkdir {}: {e}", parent.display()))?;
    }
    let mut f =
        std::fs::File::create(path).map_err(|e| format!("create {}: {e}", path.display()))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| format!("write {}: {e}", path.display()))?;
    Ok(())
}

// ---------------------------------------------------------------------
// overhead
// ---------------------------------------------------------------------

pub fn run_overhead(w: u64, q: u64, l: u64, k: u64, p: u64) -> Result<(), String> {
    let table = metrics::overhead_table(w, q, l, k, p).map_err(|e| e.to_string())?;
    println!("scheme,time_slots");
    println!("vq_ofdma,{}", table.vq_ofdma);
    println!("fsk_mv,{}", table.fsk_mv);
    println!("obda,{}", table.obda);
    println!("md_aircomp,{}", table.md_aircomp);
    Ok(())
}

// ---------------------------------------------------------------------
// detect-bench
// ---------------------------------------------------------------------

const BENCH_HEADER: &str =
    "snr_db,trial,ka_true,ka_mv,ka_me,nmse_db,sparsity_ratio,p_c1,p_c2,mean_iters";

fn bench_row(snr: f64, trial: u64, result: &TrialResult<f64>) -> String {
    let nmse = nmse_db(&result.truth_real(), &result.detected)
        .map(fmt_f64)
        .unwrap_or_default();
    let stats = collision_stats(&result.truth, result.ka_true.max(1)).ok();
    let mean_iters =
        result.iters.iter().sum::<usize>() as f64 / result.iters.len().max(1) as f64;
    format!(
        "{},{trial},{},{},{},{nmse},{},{},{},{}",
        fmt_f64(snr),
        result.ka_true,
        result.ka_majority(),
        result.ka_mean(),
        fmt_opt(stats.map(|s| fmt_f64(s.sparsity_ratio))),
        fmt_opt(stats.map(|s| fmt_f64(s.p_c1))),
        fmt_opt(stats.map(|s| fmt_f64(s.p_c2))),
        fmt_f64(mean_iters),
    )
}

pub fn run_detect_bench(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), String> {
    let mut csv = String::from(BENCH_HEADER);
    csv.push('\n');
    for &snr in &cfg.snr_db {
        let bench = cfg.bench_config(snr);
        let p = ModCodebook::<f64>::generate(
            bench.seq_len,
            bench.codebook_size,
            aircomp::seed::derive_seed(cfg.seed, "cli-modbook", 0),
        )
        .map_err(|e| e.to_string())?;
        let trials: Vec<(u64, TrialResult<f64>)> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let trial_seed = aircomp::seed::derive_seed(cfg.seed, "cli-trial", t);
                (t, run_trial(&bench, &p, trial_seed))
            })
            .collect::<Vec<_>>()
            .into_iter()
            .map(|(t, r)| r.map(|ok| (t, ok)).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;

        let mut nmses = Vec::with_capacity(trials.len());
        let mut mv_hits = 0usize;
        for (t, result) in &trials {
            let _ = writeln!(csv, "{}", bench_row(snr, *t, result));
            if let Ok(v) = nmse_db(&result.truth_real(), &result.detected) {
                nmses.push(v);
            }
            if result.ka_majority() == result.ka_true {
                mv_hits += 1;
            }
        }
        nmses.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = nmses.get(nmses.len() / 2).copied().unwrap_or(f64::NAN);
        println!(
            "snr {snr} dB: median nmse {median:.2} dB, majority vote {mv_hits}/{}",
            trials.len()
        );
    }
    let csv_path = out_dir.join("detect_bench.csv");
    write_file(&csv_path, &csv)?;
    RunManifest::new("detect-bench", cfg.seed, cfg.to_map())
        .write(&out_dir.join("detect_bench.manifest.json"))
        .map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------
// feel
// ---------------------------------------------------------------------

const FEEL_HEADER: &str = "seed,scheme,round,test_accuracy,nmse_db,ka_true,ka_hat,\
sparsity_ratio,p_c1,p_c2,inversion_power,symbols_sent,skipped";

fn feel_row(seed: u64, record: &RoundRecord) -> String {
    format!(
        "{seed},{},{},{},{},{},{},{},{},{},{},{},{}",
        record.scheme.label(),
        record.round,
        fmt_f64(record.test_accuracy),
        fmt_opt(record.nmse_db.map(fmt_f64)),
        fmt_opt(record.ka_true),
        fmt_opt(record.ka_hat),
        fmt_opt(record.sparsity_ratio.map(fmt_f64)),
        fmt_opt(record.p_c1.map(fmt_f64)),
        fmt_opt(record.p_c2.map(fmt_f64)),
        fmt_opt(record.inversion_power.map(fmt_f64)),
        record.symbols_sent,
        record.skipped,
    )
}

pub fn run_feel(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), String> {
    let feel_cfg = cfg.feel_config();
    let cells: Vec<(u64, feel::Scheme)> = (0..cfg.seeds as u64)
        .flat_map(|s| cfg.schemes.iter().map(move |&scheme| (cfg.seed + s, scheme)))
        .collect();
    type ArmRun = (u64, feel::Scheme, Vec<RoundRecord>, Vec<f64>);
    let results: Vec<Result<ArmRun, String>> = cells
        .par_iter()
        .map(|&(seed, scheme)| {
            let data = feel::build_data::<f64>(&feel_cfg, seed).map_err(|e| e.to_string())?;
            let mut state =
                feel::FeelState::<f64>::new(scheme, &feel_cfg, seed).map_err(|e| e.to_string())?;
            let mut records = Vec::with_capacity(cfg.rounds);
            for round in 0..cfg.rounds {
                records.push(
                    feel::run_round(&mut state, &feel_cfg, &data, round, seed)
                        .map_err(|e| e.to_string())?,
                );
            }
            Ok((seed, scheme, records, state.model.weights))
        })
        .collect();

    let mut csv = String::from(FEEL_HEADER);
    csv.push('\n');
    let mut weights_csv = String::from("seed,scheme,index,weight\n");
    for result in results {
        let (seed, scheme, records, weights) = result?;
        for record in &records {
            let _ = writeln!(csv, "{}", feel_row(seed, record));
        }
        for (index, w) in weights.iter().enumerate() {
            let _ = writeln!(
                weights_csv,
                "{seed},{},{index},{}",
                scheme.label(),
                fmt_f64(*w)
            );
        }
        if let Some(last) = records.last() {
            println!(
                "seed {seed} {}: final accuracy {:.4}",
                scheme.label(),
                last.test_accuracy
            );
        }
    }
    let csv_path = out_dir.join("feel.csv");
    write_file(&csv_path, &csv)?;
    write_file(&out_dir.join("feel_weights.csv"), &weights_csv)?;
    RunManifest::new("feel", cfg.seed, cfg.to_map())
        .write(&out_dir.join("feel.manifest.json"))
        .map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

// ---------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------

const SWEEP_HEADER: &str =
    "cell,snr_db,trials,median_nmse_db,mv_hit_rate,me_hit_rate,mean_sparsity_ratio";

/// Cartesian grid over config keys; each cell runs a detection benchmark
/// and is summarized in one CSV row.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    grid: &[(String, Vec<String>)],
    out_dir: &Path,
) -> Result<(), String> {
    if grid.is_empty() {
        return Err("sweep requires at least one --grid key=v1,v2 axis".into());
    }
    // Expand the cartesian product of grid assignments.
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(cells.len() * values.len());
        for cell in &cells {
            for value in values {
                let mut assignment = cell.clone();
                assignment.push((key.clone(), value.clone()));
                next.push(assignment);
            }
        }
        cells = next;
    }

    let mut csv = String::from(SWEEP_HEADER);
    csv.push('\n');
    for assignment in &cells {
        let mut cell_cfg = cfg.clone();
        let mut label = String::new();
        for (key, value) in assignment {
            cell_cfg.set(key, value)?;
            if !label.is_empty() {
                label.push(';');
            }
            let _ = write!(label, "{key}={value}");
        }
        for &snr in &cell_cfg.snr_db.clone() {
            let bench = cell_cfg.bench_config(snr);
            let p = ModCodebook::<f64>::generate(
                bench.seq_len,
                bench.codebook_size,
                aircomp::seed::derive_seed(cell_cfg.seed, "cli-modbook", 0),
            )
            .map_err(|e| e.to_string())?;
            let trials: Vec<TrialResult<f64>> = (0..cell_cfg.trials as u64)
                .into_par_iter()
                .map(|t| {
                    run_trial(
                        &bench,
                        &p,
                        aircomp::seed::derive_seed(cell_cfg.seed, "cli-trial", t),
                    )
                })
                .collect::<Vec<_>>()
                .into_iter()
                .collect::<Result<_, _>>()
                .map_err(|e| e.to_string())?;
            let mut nmses: Vec<f64> = trials
                .iter()
                .filter_map(|r| nmse_db(&r.truth_real(), &r.detected).ok())
                .collect();
            nmses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = nmses.get(nmses.len() / 2).copied().unwrap_or(f64::NAN);
            let mv = trials.iter().filter(|r| r.ka_majority() == r.ka_true).count();
            let me = trials.iter().filter(|r| r.ka_mean() == r.ka_true).count();
            let sparsity: f64 = trials
                .iter()
                .filter_map(|r| collision_stats(&r.truth, r.ka_true.max(1)).ok())
                .map(|s| s.sparsity_ratio)
                .sum::<f64>()
                / trials.len().max(1) as f64;
            let _ = writeln!(
                csv,
                "{label},{},{},{},{},{},{}",
                fmt_f64(snr),
                trials.len(),
                fmt_f64(median),
                fmt_f64(mv as f64 / trials.len().max(1) as f64),
                fmt_f64(me as f64 / trials.len().max(1) as f64),
                fmt_f64(sparsity),
            );
            println!("cell [{label}] snr {snr}: median nmse {median:.2} dB");
        }
    }
    let csv_path = out_dir.join("sweep.csv");
    write_file(&csv_path, &csv)?;
    RunManifest::new("sweep", cfg.seed, cfg.to_map())
        .write(&out_dir.join("sweep.manifest.json"))
        .map_err(|e| e.to_string())?;
    println!("wrote {}", csv_path.display());
    Ok(())
}

/// Resolve the output directory: flag, then environment, then the current
/// directory.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("AIRCOMP_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}
