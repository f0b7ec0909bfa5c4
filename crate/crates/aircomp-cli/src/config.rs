//! Flat key-value experiment configuration.
//!
//! The config file is plain `key = value` lines (`#` starts a comment).
//! Every key is typed and validated; unknown keys are rejected outright,
//! since a silently ignored knob is the fastest way to an irreproducible
//! experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use aircomp::detector::{DetectorConfig, ResidualRule};
use aircomp::feel::{FeelConfig, Scheme};
use aircomp::sim::BenchConfig;

/// Every knob of every subcommand, with the reference defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // Population and wireless geometry.
    pub devices: usize,
    pub antennas: usize,
    pub bits: u32,
    pub block_dim: usize,
    pub seq_len: usize,
    pub snr_db: Vec<f64>,
    pub activity_ratio: f64,
    pub eps_h: f64,
    pub phase_max: f64,
    // Detector.
    pub damping: f64,
    pub max_iters: usize,
    pub min_iters_before_stop: usize,
    pub ka_prior: usize, // 0 derives ceil(0.4 * devices)
    pub residual_rule: String,
    // Benchmark shape.
    pub trials: usize,
    pub blocks: usize,
    pub hot_fraction: f64,
    pub distinct: bool,
    // Learning loop.
    pub schemes: Vec<Scheme>,
    pub rounds: usize,
    pub seeds: usize,
    pub eta: f64,
    pub eta_l: f64,
    pub local_iters: usize,
    pub batch: usize,
    pub oracle_ka: bool,
    pub refresh_codebook: bool,
    pub ideal_channel: bool,
    // Task shape.
    pub classes: usize,
    pub feature_dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub bs_per_class: usize,
    pub center_scale: f64,
    pub noise_std: f64,
    pub random_frac: f64,
    // Reproducibility.
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let feel = FeelConfig::desk_default();
        let bench = BenchConfig::reference();
        Self {
            devices: feel.devices,
            antennas: feel.antennas,
            bits: 6,
            block_dim: 20,
            seq_len: bench.seq_len,
            snr_db: vec![20.0],
            activity_ratio: feel.activity_ratio,
            eps_h: feel.eps_h,
            phase_max: 0.0,
            damping: 0.3,
            max_iters: 50,
            min_iters_before_stop: 15,
            ka_prior: 0,
            residual_rule: "per_block".into(),
            trials: 100,
            blocks: bench.blocks,
            hot_fraction: bench.hot_fraction,
            distinct: false,
            schemes: vec![Scheme::Ifed, Scheme::PerfectAgg, Scheme::MdAirComp],
            rounds: 200,
            seeds: 1,
            eta: feel.eta,
            eta_l: feel.eta_l,
            local_iters: feel.local_iters,
            batch: feel.batch,
            oracle_ka: false,
            refresh_codebook: true,
            ideal_channel: false,
            classes: feel.classes,
            // Large enough that ceil(W/Q) = 65 blocks cover the 64-codeword
            // quantizer of the reference preset.
            feature_dim: 426,
            train_per_class: feel.train_per_class,
            test_per_class: feel.test_per_class,
            bs_per_class: feel.bs_per_class,
            center_scale: 0.15,
            noise_std: feel.noise_std,
            random_frac: feel.random_frac,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("bad value {value:?} for key {key:?}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| parse(key, v))
        .collect::<Result<Vec<T>, String>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(format!("empty list for key {key:?}"))
            } else {
                Ok(v)
            }
        })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("bad boolean {other:?} for key {key:?}")),
    }
}

impl ExperimentConfig {
    /// Apply one `key = value` assignment. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "devices" => self.devices = parse(key, value)?,
            "antennas" => self.antennas = parse(key, value)?,
            "bits" => self.bits = parse(key, value)?,
            "block_dim" => self.block_dim = parse(key, value)?,
            "seq_len" => self.seq_len = parse(key, value)?,
            "snr_db" => self.snr_db = parse_list(key, value)?,
            "activity_ratio" => self.activity_ratio = parse(key, value)?,
            "eps_h" => self.eps_h = parse(key, value)?,
            "phase_max" => self.phase_max = parse(key, value)?,
            "damping" => self.damping = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "min_iters_before_stop" => self.min_iters_before_stop = parse(key, value)?,
            "ka_prior" => self.ka_prior = parse(key, value)?,
            "residual_rule" => {
                let v = value.trim();
                if v != "per_block" && v != "joint" {
                    return Err(format!("residual_rule must be per_block or joint, got {v:?}"));
                }
                self.residual_rule = v.into();
            }
            "trials" => self.trials = parse(key, value)?,
            "blocks" => self.blocks = parse(key, value)?,
            "hot_fraction" => self.hot_fraction = parse(key, value)?,
            "distinct" => self.distinct = parse_bool(key, value)?,
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(|s| s.trim().parse::<Scheme>().map_err(|e| e.to_string()))
                    .collect::<Result<Vec<_>, _>>()?;
            }
            "rounds" => self.rounds = parse(key, value)?,
            "seeds" => self.seeds = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "eta_l" => self.eta_l = parse(key, value)?,
            "local_iters" => self.local_iters = parse(key, value)?,
            "batch" => self.batch = parse(key, value)?,
            "oracle_ka" => self.oracle_ka = parse_bool(key, value)?,
            "refresh_codebook" => self.refresh_codebook = parse_bool(key, value)?,
            "ideal_channel" => self.ideal_channel = parse_bool(key, value)?,
            "classes" => self.classes = parse(key, value)?,
            "feature_dim" => self.feature_dim = parse(key, value)?,
            "train_per_class" => self.train_per_class = parse(key, value)?,
            "test_per_class" => self.test_per_class = parse(key, value)?,
            "bs_per_class" => self.bs_per_class = parse(key, value)?,
            "center_scale" => self.center_scale = parse(key, value)?,
            "noise_std" => self.noise_std = parse(key, value)?,
            "random_frac" => self.random_frac = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(format!("unknown config key {other:?}")),
        }
        Ok(())
    }

    /// Parse a flat key-value file and apply it over the defaults.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", lineno + 1))?;
        }
        Ok(cfg)
    }

    pub fn codebook_size(&self) -> usize {
        1usize << self.bits
    }

    pub fn ka_prior_effective(&self) -> usize {
        if self.ka_prior > 0 {
            self.ka_prior
        } else {
            (0.4 * self.devices as f64).ceil() as usize
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            max_iters: self.max_iters,
            damping: self.damping,
            ka_prior: self.ka_prior_effective(),
            min_iters_before_stop: self.min_iters_before_stop,
            residual_rule: if self.residual_rule == "joint" {
                ResidualRule::Joint
            } else {
                ResidualRule::PerBlock
            },
        }
    }

    /// Benchmark view of the configuration at one SNR point.
    pub fn bench_config(&self, snr_db: f64) -> BenchConfig {
        BenchConfig {
            codebook_size: self.codebook_size(),
            seq_len: self.seq_len,
            antennas: self.antennas,
            devices: self.devices,
            activity_ratio: self.activity_ratio,
            eps_h: self.eps_h,
            snr_db,
            phase_max: self.phase_max,
            blocks: self.blocks,
            hot_fraction: self.hot_fraction,
            distinct: self.distinct,
            detector: self.detector_config(),
        }
    }

    /// Learning-loop view of the configuration.
    pub fn feel_config(&self) -> FeelConfig {
        FeelConfig {
            devices: self.devices,
            activity_ratio: self.activity_ratio,
            eps_h: self.eps_h,
            eta: self.eta,
            eta_l: self.eta_l,
            local_iters: self.local_iters,
            batch: self.batch,
            bits: self.bits,
            block_dim: self.block_dim,
            seq_len: self.seq_len,
            antennas: self.antennas,
            snr_db: self.snr_db[0],
            phase_max: self.phase_max,
            detector: self.detector_config(),
            oracle_ka: self.oracle_ka,
            refresh_codebook: self.refresh_codebook,
            ideal_channel: self.ideal_channel,
            kmeans_iters: 50,
            classes: self.classes,
            feature_dim: self.feature_dim,
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            bs_per_class: self.bs_per_class,
            center_scale: self.center_scale,
            noise_std: self.noise_std,
            random_frac: self.random_frac,
        }
    }

    /// Resolved key-value view for the run manifest (sorted keys).
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("devices", self.devices.to_string());
        put("antennas", self.antennas.to_string());
        put("bits", self.bits.to_string());
        put("block_dim", self.block_dim.to_string());
        put("seq_len", self.seq_len.to_string());
        put("snr_db", {
            let mut s = String::new();
            for (i, v) in self.snr_db.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v}");
            }
            s
        });
        put("activity_ratio", self.activity_ratio.to_string());
        put("eps_h", self.eps_h.to_string());
        put("phase_max", self.phase_max.to_string());
        put("damping", self.damping.to_string());
        put("max_iters", self.max_iters.to_string());
        put(
            "min_iters_before_stop",
            self.min_iters_before_stop.to_string(),
        );
        put("ka_prior", self.ka_prior_effective().to_string());
        put("residual_rule", self.residual_rule.clone());
        put("trials", self.trials.to_string());
        put("blocks", self.blocks.to_string());
        put("hot_fraction", self.hot_fraction.to_string());
        put("distinct", self.distinct.to_string());
        put("schemes", {
            let mut s = String::new();
            for (i, scheme) in self.schemes.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(scheme.label());
            }
            s
        });
        put("rounds", self.rounds.to_string());
        put("seeds", self.seeds.to_string());
        put("eta", self.eta.to_string());
        put("eta_l", self.eta_l.to_string());
        put("local_iters", self.local_iters.to_string());
        put("batch", self.batch.to_string());
        put("oracle_ka", self.oracle_ka.to_string());
        put("refresh_codebook", self.refresh_codebook.to_string());
        put("ideal_channel", self.ideal_channel.to_string());
        put("classes", self.classes.to_string());
        put("feature_dim", self.feature_dim.to_string());
        put("train_per_class", self.train_per_class.to_string());
        put("test_per_class", self.test_per_class.to_string());
        put("bs_per_class", self.bs_per_class.to_string());
        put("center_scale", self.center_scale.to_string());
        put("noise_std", self.noise_std.to_string());
        put("random_frac", self.random_frac.to_string());
        put("seed", self.seed.to_string());
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_file_and_rejects_unknown_keys() {
        let dir = std::env::temp_dir();
        let path = dir.join("aircomp_cfg_test.txt");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "# comment\nsnr_db = 0,5,20\ndevices = 12\ndistinct = true").unwrap();
        drop(f);
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.snr_db, vec![0.0, 5.0, 20.0]);
        assert_eq!(cfg.devices, 12);
        assert!(cfg.distinct);

        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "no_such_key = 3").unwrap();
        drop(f);
        let err = ExperimentConfig::from_file(&path).unwrap_err();
        assert!(err.contains("unknown config key"), "{err}");
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn ka_prior_derives_from_population() {
        let mut cfg = ExperimentConfig {
            devices: 40,
            ka_prior: 0,
            ..Default::default()
        };
        assert_eq!(cfg.ka_prior_effective(), 16);
        cfg.ka_prior = 9;
        assert_eq!(cfg.ka_prior_effective(), 9);
    }
}
