//! Synthetic detection benchmark.
//!
//! Generates rounds of superposed transmissions without the learning loop:
//! a device population, activity sampling with the deep-fade threshold,
//! per-block sequence selections, the fading channel, and the detector.
//! Selections can be concentrated on a random subset of the codebook to
//! mimic the heavy collisions of early training rounds, or forced distinct
//! for unit-count ground truths.

use rand::Rng;

use crate::channel::{self, ChannelRealization};
use crate::detector::{self, DetectorConfig};
use crate::error::Result;
use crate::modcodebook::ModCodebook;
use crate::scalar::Real;
use crate::seed;

/// Configuration of one synthetic detection round.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Codebook size `N`.
    pub codebook_size: usize,
    /// Sequence length `L`.
    pub seq_len: usize,
    /// Receive antennas `M`.
    pub antennas: usize,
    /// Device population `K`.
    pub devices: usize,
    /// Fraction of the population active per round.
    pub activity_ratio: f64,
    /// Deep-fade threshold on the first-antenna gain.
    pub eps_h: f64,
    /// Uplink SNR in dB (`f64::INFINITY` disables noise).
    pub snr_db: f64,
    /// Maximum residual phase offset in radians.
    pub phase_max: f64,
    /// Blocks per round `D`.
    pub blocks: usize,
    /// Selections are drawn uniformly from a random subset of
    /// `ceil(hot_fraction * N)` codewords; `1.0` is uniform over the whole
    /// codebook, smaller values produce early-training-style collisions.
    pub hot_fraction: f64,
    /// Force distinct selections (every used codeword has count one).
    pub distinct: bool,
    /// Detector settings.
    pub detector: DetectorConfig,
}

impl BenchConfig {
    /// Reference operating point: `N = 64`, `L = 20`, `M = 4`, forty devices
    /// at 30% activity with the 0.14 fade threshold, 20 dB SNR, collisions
    /// matched to early training.
    pub fn reference() -> Self {
        Self {
            codebook_size: 64,
            seq_len: 20,
            antennas: 4,
            devices: 40,
            activity_ratio: 0.3,
            eps_h: 0.14,
            snr_db: 20.0,
            phase_max: 0.0,
            blocks: 50,
            hot_fraction: 0.25,
            distinct: false,
            detector: DetectorConfig::for_device_count(40),
        }
    }
}

/// Ground truth and detection output of one synthetic round.
#[derive(Debug, Clone)]
pub struct TrialResult<T> {
    /// Number of devices that actually transmitted.
    pub ka_true: usize,
    /// True integer counts per block.
    pub truth: Vec<Vec<u32>>,
    /// Detected (unrounded) counts per block.
    pub detected: Vec<Vec<T>>,
    /// Detector iterations per block.
    pub iters: Vec<usize>,
}

impl<T: Real> TrialResult<T> {
    pub fn truth_real(&self) -> Vec<Vec<T>> {
        self.truth
            .iter()
            .map(|c| c.iter().map(|&x| T::from_f64_lossy(x as f64)).collect())
            .collect()
    }

    /// Majority-vote estimate over the detected blocks.
    pub fn ka_majority(&self) -> usize {
        detector::estimate_ka(&self.detected)
    }

    /// Blockwise-mean estimate over the detected blocks.
    pub fn ka_mean(&self) -> usize {
        detector::estimate_ka_mean(&self.detected)
    }

    /// True when every detected count rounds to the true integer.
    pub fn exact_after_rounding(&self) -> bool {
        self.detected.iter().zip(&self.truth).all(|(det, tru)| {
            det.iter()
                .zip(tru)
                .all(|(a, &b)| (a.to_f64_lossy().round() - b as f64).abs() < 0.5)
        })
    }
}

/// Run one synthetic round against a fixed codebook.
pub fn run_trial<T: Real>(
    cfg: &BenchConfig,
    p: &ModCodebook<T>,
    master_seed: u64,
) -> Result<TrialResult<T>> {
    let n = cfg.codebook_size;
    let h = ChannelRealization::<T>::sample(
        cfg.devices,
        cfg.antennas,
        seed::derive_seed(master_seed, "bench-channel", 0),
    )?;
    let candidates: Vec<usize> = (0..cfg.devices).collect();
    let participants = channel::select_participants(
        &candidates,
        cfg.activity_ratio,
        &h,
        T::from_f64_lossy(cfg.eps_h),
        seed::derive_seed(master_seed, "bench-participants", 0),
    )?;
    let ka = participants.len();

    let mut rng = seed::rng_for(master_seed, "bench-selections", 0);
    let hot = ((cfg.hot_fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut truth = Vec::with_capacity(cfg.blocks);
    let mut detected = Vec::with_capacity(cfg.blocks);
    let mut iters = Vec::with_capacity(cfg.blocks);
    for block in 0..cfg.blocks {
        let selections: Vec<(usize, usize)> = if cfg.distinct {
            rand::seq::index::sample(&mut rng, n, ka.min(n))
                .into_iter()
                .zip(participants.iter())
                .map(|(idx, &dev)| (dev, idx))
                .collect()
        } else {
            let subset: Vec<usize> = rand::seq::index::sample(&mut rng, n, hot).into_iter().collect();
            participants
                .iter()
                .map(|&dev| (dev, subset[rng.random_range(0..hot)]))
                .collect()
        };
        let (rx, eq) = channel::transmit_block(
            p,
            &selections,
            &h,
            cfg.snr_db,
            cfg.phase_max,
            seed::derive_seed(master_seed, "bench-tx", block as u64),
        )?;
        let det = detector::detect_block(&rx.y, p, &cfg.detector)?;
        truth.push(eq.counts);
        detected.push(det.counts);
        iters.push(det.iters);
    }
    Ok(TrialResult {
        ka_true: ka,
        truth,
        detected,
        iters,
    })
}
