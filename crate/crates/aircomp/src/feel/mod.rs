//! Federated edge learning loop.
//!
//! One round: broadcast the model, let the active devices run local SGD,
//! compensate with the accumulated quantization error, quantize against the
//! shared codebook, modulate the indices onto the shared sequences, superpose
//! them over the fading channel, detect the per-sequence counts, estimate the
//! number of active devices by majority vote, aggregate, and update the
//! global model. Two reference arms bracket the full pipeline: an ideal
//! (uncompressed, error-free) arm and a perfect-aggregation arm that keeps
//! the transmitter but assumes error-free reception.

pub mod data;
pub mod model;

use crate::channel::{self, ChannelRealization};
use crate::detector::{self, DetectorConfig};
use crate::error::{Error, Result};
use crate::metrics;
use crate::modcodebook::ModCodebook;
use crate::quantizer::{ErrorState, QuantCodebook};
use crate::scalar::Real;
use crate::seed;

pub use data::{label_emd, make_blobs, make_noniid_split, Dataset, DeviceShard};
pub use model::{local_train, sgd_steps, Model};

/// Aggregation arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Ideal federated averaging: no quantization, error-free channel.
    Ifed,
    /// Quantized transmitter with perfect aggregation at the receiver.
    PerfectAgg,
    /// Full quantize-modulate-superpose-detect pipeline.
    MdAirComp,
}

impl Scheme {
    pub fn label(&self) -> &'static str {
        match self {
            Scheme::Ifed => "ifed",
            Scheme::PerfectAgg => "pa",
            Scheme::MdAirComp => "mdaircomp",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ifed" => Ok(Scheme::Ifed),
            "pa" => Ok(Scheme::PerfectAgg),
            "mdaircomp" => Ok(Scheme::MdAirComp),
            other => Err(Error::Parse(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Full experiment configuration (values are plain `f64`; the state scalar
/// type is chosen when the state is built).
#[derive(Debug, Clone, PartialEq)]
pub struct FeelConfig {
    /// Device population `K`.
    pub devices: usize,
    /// Fraction of devices active per round.
    pub activity_ratio: f64,
    /// Deep-fade participation threshold on the first-antenna gain.
    pub eps_h: f64,
    /// Global learning rate.
    pub eta: f64,
    /// Local learning rate.
    pub eta_l: f64,
    /// Local SGD steps per round.
    pub local_iters: usize,
    /// Minibatch size.
    pub batch: usize,
    /// Quantization bits `J` (codebook size `N = 2^J`).
    pub bits: u32,
    /// Quantization block length `Q`.
    pub block_dim: usize,
    /// Sequence length `L`.
    pub seq_len: usize,
    /// Receive antennas `M`.
    pub antennas: usize,
    /// Uplink SNR in dB (`f64::INFINITY` disables noise).
    pub snr_db: f64,
    /// Maximum residual phase offset (radians) from imperfect estimation.
    pub phase_max: f64,
    /// Detector settings.
    pub detector: DetectorConfig,
    /// Substitute the true number of participants for the majority-vote
    /// estimate (ablation).
    pub oracle_ka: bool,
    /// Relearn the quantization codebook each round from the base station's
    /// own update (off keeps the round-0 codebook).
    pub refresh_codebook: bool,
    /// Replace the wireless stack with an orthogonal square codebook, no
    /// noise, and no fade threshold; the detector runs its full iteration
    /// budget so detection collapses to the exact counts.
    pub ideal_channel: bool,
    /// Lloyd iteration budget for codebook learning.
    pub kmeans_iters: usize,
    /// Task shape.
    pub classes: usize,
    pub feature_dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub bs_per_class: usize,
    pub center_scale: f64,
    pub noise_std: f64,
    /// Share of the training data dealt uniformly before the label sort.
    pub random_frac: f64,
}

impl FeelConfig {
    /// Desk-scale defaults: 40 devices, 30% active, 3-class blobs, a
    /// 32-codeword 3-dim quantizer, 16-chip sequences over 4 antennas at
    /// 20 dB.
    pub fn desk_default() -> Self {
        Self {
            devices: 40,
            activity_ratio: 0.3,
            eps_h: 0.14,
            eta: 1.0,
            eta_l: 0.01,
            local_iters: 3,
            batch: 20,
            bits: 5,
            block_dim: 3,
            seq_len: 16,
            antennas: 4,
            snr_db: 20.0,
            phase_max: 0.0,
            detector: DetectorConfig::for_device_count(40),
            oracle_ka: false,
            refresh_codebook: true,
            ideal_channel: false,
            kmeans_iters: crate::quantizer::DEFAULT_KMEANS_ITERS,
            classes: 3,
            feature_dim: 32,
            train_per_class: 400,
            test_per_class: 200,
            bs_per_class: 40,
            center_scale: 0.5,
            noise_std: 1.0,
            random_frac: 0.2,
        }
    }

    pub fn codebook_size(&self) -> usize {
        1usize << self.bits
    }

    /// Parameter count of the task model.
    pub fn model_dim(&self) -> usize {
        self.feature_dim * self.classes + self.classes
    }

    /// Blocks per update vector, `D = ceil(W/Q)`.
    pub fn blocks(&self) -> usize {
        self.model_dim().div_ceil(self.block_dim)
    }
}

/// Per-round record written to the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub scheme: Scheme,
    pub test_accuracy: f64,
    /// Detection NMSE in dB (wireless arm only).
    pub nmse_db: Option<f64>,
    /// True number of participating devices (quantized arms).
    pub ka_true: Option<usize>,
    /// Majority-vote estimate (wireless arm only).
    pub ka_hat: Option<usize>,
    pub sparsity_ratio: Option<f64>,
    pub p_c1: Option<f64>,
    pub p_c2: Option<f64>,
    /// Total pre-equalization power `sum 1/|h_k1|^2` spent by the
    /// participants (quantized arms).
    pub inversion_power: Option<f64>,
    /// Uplink symbols consumed this round (model elements for the ideal arm).
    pub symbols_sent: u64,
    /// True when the round was skipped because no device survived the fade
    /// threshold.
    pub skipped: bool,
}

/// Mutable state of one scheme arm.
#[derive(Debug, Clone)]
pub struct FeelState<T> {
    pub scheme: Scheme,
    pub model: Model<T>,
    pub device_errors: Vec<ErrorState<T>>,
    pub bs_error: ErrorState<T>,
    pub codebook: Option<QuantCodebook<T>>,
    pub modbook: ModCodebook<T>,
}

impl<T: Real> FeelState<T> {
    pub fn new(scheme: Scheme, cfg: &FeelConfig, master_seed: u64) -> Result<Self> {
        let w = cfg.model_dim();
        let n = cfg.codebook_size();
        let modbook = if cfg.ideal_channel {
            ModCodebook::dft(n)?
        } else {
            ModCodebook::generate(cfg.seq_len, n, seed::derive_seed(master_seed, "modbook", 0))?
        };
        Ok(Self {
            scheme,
            model: Model::zeros(cfg.feature_dim, cfg.classes),
            device_errors: vec![ErrorState::zeros(w); cfg.devices],
            bs_error: ErrorState::zeros(w),
            codebook: None,
            modbook,
        })
    }
}

/// Shared inputs of one experiment: the device shards, the base station's
/// own shard (used to train the codebook), and the test set.
#[derive(Debug, Clone)]
pub struct FeelData<T> {
    pub shards: Vec<DeviceShard<T>>,
    pub bs_shard: DeviceShard<T>,
    pub test: Dataset<T>,
}

/// Deterministically build the task data for a master seed. One blob draw
/// fixes the class centers; the shuffled rows are then partitioned into the
/// device training pool, the test set, and the base station's local shard,
/// so all three share the same task.
pub fn build_data<T: Real>(cfg: &FeelConfig, master_seed: u64) -> Result<FeelData<T>> {
    let per_class = cfg.train_per_class + cfg.test_per_class + cfg.bs_per_class;
    let all = make_blobs::<T>(
        cfg.classes,
        cfg.feature_dim,
        per_class,
        cfg.center_scale,
        cfg.noise_std,
        seed::derive_seed(master_seed, "task-data", 0),
    );
    let f = cfg.feature_dim;
    let n_train = cfg.classes * cfg.train_per_class;
    let n_test = cfg.classes * cfg.test_per_class;
    let slice = |lo: usize, hi: usize| Dataset {
        features: all.features[lo * f..hi * f].to_vec(),
        labels: all.labels[lo..hi].to_vec(),
        feature_dim: f,
        classes: cfg.classes,
    };
    let train = slice(0, n_train);
    let test = slice(n_train, n_train + n_test);
    let bs = slice(n_train + n_test, all.len());
    let shards = make_noniid_split(&train, cfg.devices, cfg.random_frac, master_seed)?;
    let bs_shard = DeviceShard {
        device_id: cfg.devices,
        feature_dim: f,
        features: bs.features,
        labels: bs.labels,
    };
    Ok(FeelData {
        shards,
        bs_shard,
        test,
    })
}

fn mean_update<T: Real>(updates: &[Vec<T>], w: usize) -> Vec<T> {
    let inv = T::one() / T::from_f64_lossy(updates.len() as f64);
    let mut acc = vec![T::zero(); w];
    for u in updates {
        for (a, &x) in acc.iter_mut().zip(u) {
            *a = *a + x;
        }
    }
    for a in acc.iter_mut() {
        *a = *a * inv;
    }
    acc
}

fn apply_update<T: Real>(model: &mut Model<T>, update: &[T], eta: f64) {
    let eta = T::from_f64_lossy(eta);
    for (w, &u) in model.weights.iter_mut().zip(update) {
        *w = *w + eta * u;
    }
}

/// Refresh (or initialize) the shared codebook from the base station's own
/// error-compensated update, mirroring a device's quantization path.
fn refresh_codebook<T: Real>(
    state: &mut FeelState<T>,
    cfg: &FeelConfig,
    data: &FeelData<T>,
    round: usize,
    master_seed: u64,
) -> Result<()> {
    if state.codebook.is_some() && !cfg.refresh_codebook {
        return Ok(());
    }
    let delta = local_train(
        &state.model,
        &data.bs_shard,
        cfg.eta_l,
        cfg.local_iters,
        cfg.batch,
        seed::derive_seed(master_seed, "bs-train", round as u64),
    )?;
    let s_bar = state.bs_error.compensate(&delta)?;
    // Zero-pad to whole blocks; the padded blocks are the training samples.
    let q = cfg.block_dim;
    let d = cfg.blocks();
    let mut padded = s_bar.clone();
    padded.resize(d * q, T::zero());
    let book = QuantCodebook::learn(
        &padded,
        q,
        cfg.codebook_size(),
        cfg.kmeans_iters,
        seed::derive_seed(master_seed, "codebook", round as u64),
    )?;
    let (_, quantized) = book.encode(&s_bar)?;
    state.bs_error.accumulate(&delta, &quantized)?;
    state.codebook = Some(book);
    Ok(())
}

/// Run one global round of the given arm, mutating `state` and returning the
/// round record. Seeds derive from `(master_seed, role, round)` only, so
/// arms sharing a master seed see identical data draws, channels, and
/// minibatch choices.
pub fn run_round<T: Real>(
    state: &mut FeelState<T>,
    cfg: &FeelConfig,
    data: &FeelData<T>,
    round: usize,
    master_seed: u64,
) -> Result<RoundRecord> {
    let w = cfg.model_dim();
    let candidates: Vec<usize> = (0..cfg.devices).collect();
    let h = ChannelRealization::<T>::sample(
        cfg.devices,
        cfg.antennas,
        seed::derive_seed(master_seed, "channel", round as u64),
    )?;
    // The quantized arms share the full transmitter, including the
    // deep-fade participation threshold; only the ideal arm ignores the
    // channel entirely.
    let eps_h = match state.scheme {
        Scheme::Ifed => 0.0,
        Scheme::PerfectAgg | Scheme::MdAirComp => cfg.eps_h,
    };
    let participants = match channel::select_participants(
        &candidates,
        cfg.activity_ratio,
        &h,
        T::from_f64_lossy(eps_h),
        seed::derive_seed(master_seed, "participants", round as u64),
    ) {
        Ok(p) => p,
        Err(Error::NoParticipants) => {
            return Ok(RoundRecord {
                round,
                scheme: state.scheme,
                test_accuracy: state.model.evaluate(&data.test.features, &data.test.labels),
                nmse_db: None,
                ka_true: Some(0),
                ka_hat: None,
                sparsity_ratio: None,
                p_c1: None,
                p_c2: None,
                inversion_power: None,
                symbols_sent: 0,
                skipped: true,
            });
        }
        Err(e) => return Err(e),
    };
    let ka_true = participants.len();
    let round_inversion_power = match state.scheme {
        Scheme::Ifed => None,
        _ => Some(channel::inversion_power(&h, &participants).to_f64_lossy()),
    };

    // Local training on every participating device.
    let mut deltas: Vec<Vec<T>> = Vec::with_capacity(ka_true);
    for &k in &participants {
        deltas.push(local_train(
            &state.model,
            &data.shards[k],
            cfg.eta_l,
            cfg.local_iters,
            cfg.batch,
            seed::derive_seed(master_seed, "local", (round * cfg.devices + k) as u64),
        )?);
    }

    let record = match state.scheme {
        Scheme::Ifed => {
            let update = mean_update(&deltas, w);
            apply_update(&mut state.model, &update, cfg.eta);
            RoundRecord {
                round,
                scheme: state.scheme,
                test_accuracy: state.model.evaluate(&data.test.features, &data.test.labels),
                nmse_db: None,
                ka_true: Some(ka_true),
                ka_hat: None,
                sparsity_ratio: None,
                p_c1: None,
                p_c2: None,
                inversion_power: None,
                symbols_sent: (w * ka_true) as u64,
                skipped: false,
            }
        }
        Scheme::PerfectAgg => {
            refresh_codebook(state, cfg, data, round, master_seed)?;
            let book = state.codebook.as_ref().unwrap();
            let d = cfg.blocks();
            let n = cfg.codebook_size();
            let mut quantized = Vec::with_capacity(ka_true);
            let mut counts = vec![vec![0u32; n]; d];
            for (&k, delta) in participants.iter().zip(&deltas) {
                let s_bar = state.device_errors[k].compensate(delta)?;
                let (iv, q) = book.encode(&s_bar)?;
                state.device_errors[k].accumulate(delta, &q)?;
                for (block, &idx) in iv.indices.iter().enumerate() {
                    counts[block][idx] += 1;
                }
                quantized.push(q);
            }
            let update = mean_update(&quantized, w);
            apply_update(&mut state.model, &update, cfg.eta);
            let stats = metrics::collision_stats(&counts, ka_true)?;
            RoundRecord {
                round,
                scheme: state.scheme,
                test_accuracy: state.model.evaluate(&data.test.features, &data.test.labels),
                nmse_db: None,
                ka_true: Some(ka_true),
                ka_hat: None,
                sparsity_ratio: Some(stats.sparsity_ratio),
                p_c1: Some(stats.p_c1),
                p_c2: Some(stats.p_c2),
                inversion_power: round_inversion_power,
                symbols_sent: (d * ka_true) as u64,
                skipped: false,
            }
        }
        Scheme::MdAirComp => {
            refresh_codebook(state, cfg, data, round, master_seed)?;
            let book = state.codebook.as_ref().unwrap();
            let d = cfg.blocks();
            let snr = if cfg.ideal_channel {
                f64::INFINITY
            } else {
                cfg.snr_db
            };
            let phase = if cfg.ideal_channel { 0.0 } else { cfg.phase_max };
            let mut det_cfg = cfg.detector;
            if cfg.ideal_channel {
                det_cfg.min_iters_before_stop = det_cfg.max_iters;
            }

            // Quantize on every device, then transmit block by block.
            let mut index_vectors = Vec::with_capacity(ka_true);
            for (&k, delta) in participants.iter().zip(&deltas) {
                let s_bar = state.device_errors[k].compensate(delta)?;
                let (iv, q) = book.encode(&s_bar)?;
                state.device_errors[k].accumulate(delta, &q)?;
                index_vectors.push(iv);
            }

            let mut truth_counts: Vec<Vec<u32>> = Vec::with_capacity(d);
            let mut detected: Vec<Vec<T>> = Vec::with_capacity(d);
            for block in 0..d {
                let selections: Vec<(usize, usize)> = participants
                    .iter()
                    .zip(&index_vectors)
                    .map(|(&k, iv)| (k, iv.indices[block]))
                    .collect();
                let (rx, eq) = channel::transmit_block(
                    &state.modbook,
                    &selections,
                    &h,
                    snr,
                    phase,
                    seed::derive_seed(master_seed, "tx", (round * d + block) as u64),
                )?;
                let det = detector::detect_block(&rx.y, &state.modbook, &det_cfg)?;
                truth_counts.push(eq.counts);
                detected.push(det.counts);
            }

            let ka_hat = if cfg.oracle_ka {
                ka_true
            } else {
                detector::estimate_ka(&detected)
            };
            let update = detector::aggregate(book, &detected, ka_hat.max(1), w)?;
            apply_update(&mut state.model, &update, cfg.eta);

            let truth_real: Vec<Vec<T>> = truth_counts
                .iter()
                .map(|c| c.iter().map(|&x| T::from_f64_lossy(x as f64)).collect())
                .collect();
            let nmse = metrics::nmse_db(&truth_real, &detected).ok();
            let stats = metrics::collision_stats(&truth_counts, ka_true)?;
            RoundRecord {
                round,
                scheme: state.scheme,
                test_accuracy: state.model.evaluate(&data.test.features, &data.test.labels),
                nmse_db: nmse,
                ka_true: Some(ka_true),
                ka_hat: Some(ka_hat),
                sparsity_ratio: Some(stats.sparsity_ratio),
                p_c1: Some(stats.p_c1),
                p_c2: Some(stats.p_c2),
                inversion_power: round_inversion_power,
                symbols_sent: (d * cfg.seq_len) as u64,
                skipped: false,
            }
        }
    };
    Ok(record)
}

/// Run `rounds` rounds of one arm from a fresh state.
pub fn run_arm<T: Real>(
    scheme: Scheme,
    cfg: &FeelConfig,
    data: &FeelData<T>,
    rounds: usize,
    master_seed: u64,
) -> Result<Vec<RoundRecord>> {
    let mut state = FeelState::<T>::new(scheme, cfg, master_seed)?;
    let mut records = Vec::with_capacity(rounds);
    for round in 0..rounds {
        records.push(run_round(&mut state, cfg, data, round, master_seed)?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> FeelConfig {
        let mut cfg = FeelConfig::desk_default();
        cfg.devices = 8;
        cfg.activity_ratio = 0.5; // four participants per round
        cfg.feature_dim = 10;
        cfg.classes = 3;
        cfg.train_per_class = 32; // 96 samples over 8 devices
        cfg.test_per_class = 30;
        cfg.bs_per_class = 30;
        cfg.bits = 4; // N = 16 <= D = 17 blocks of the 33-entry model
        cfg.block_dim = 2;
        cfg.seq_len = 8;
        cfg.antennas = 4;
        cfg.detector = DetectorConfig::for_device_count(8);
        cfg
    }

    #[test]
    fn zero_global_rate_keeps_model() {
        let mut cfg = small_cfg();
        cfg.eta = 0.0;
        let data = build_data::<f64>(&cfg, 5).unwrap();
        let mut state = FeelState::<f64>::new(Scheme::Ifed, &cfg, 5).unwrap();
        let before = state.model.clone();
        run_round(&mut state, &cfg, &data, 0, 5).unwrap();
        assert_eq!(state.model, before);
    }

    #[test]
    fn single_active_device_ifed_applies_its_delta() {
        let mut cfg = small_cfg();
        cfg.devices = 4;
        cfg.train_per_class = 16; // 48 samples over 4 devices
        cfg.activity_ratio = 0.25; // exactly one device
        let data = build_data::<f64>(&cfg, 6).unwrap();
        let mut state = FeelState::<f64>::new(Scheme::Ifed, &cfg, 6).unwrap();
        let w0 = state.model.weights.clone();
        run_round(&mut state, &cfg, &data, 0, 6).unwrap();

        // Re-derive the sole participant and its delta.
        let h = ChannelRealization::<f64>::sample(4, cfg.antennas, seed::derive_seed(6, "channel", 0))
            .unwrap();
        let p = channel::select_participants(
            &[0, 1, 2, 3],
            0.25,
            &h,
            0.0,
            seed::derive_seed(6, "participants", 0),
        )
        .unwrap();
        assert_eq!(p.len(), 1);
        let base = Model {
            weights: w0.clone(),
            feature_dim: cfg.feature_dim,
            classes: cfg.classes,
        };
        let delta = local_train(
            &base,
            &data.shards[p[0]],
            cfg.eta_l,
            cfg.local_iters,
            cfg.batch,
            seed::derive_seed(6, "local", p[0] as u64),
        )
        .unwrap();
        for ((w_new, w_old), d) in state.model.weights.iter().zip(&w0).zip(&delta) {
            assert!((w_new - (w_old + cfg.eta * d)).abs() < 1e-14);
        }
    }

    #[test]
    fn error_feedback_identity_holds_in_pa_rounds() {
        let cfg = small_cfg();
        let data = build_data::<f64>(&cfg, 7).unwrap();
        let mut state = FeelState::<f64>::new(Scheme::PerfectAgg, &cfg, 7).unwrap();
        // Residual before = 0; after each round, e' = delta + e - quantized
        // is enforced by construction. Spot-check one device over rounds by
        // replaying its quantization path.
        for round in 0..3 {
            let before: Vec<ErrorState<f64>> = state.device_errors.clone();
            let model_before = state.model.clone();
            run_round(&mut state, &cfg, &data, round, 7).unwrap();
            let h = ChannelRealization::<f64>::sample(
                cfg.devices,
                cfg.antennas,
                seed::derive_seed(7, "channel", round as u64),
            )
            .unwrap();
            let participants = channel::select_participants(
                &(0..cfg.devices).collect::<Vec<_>>(),
                cfg.activity_ratio,
                &h,
                cfg.eps_h,
                seed::derive_seed(7, "participants", round as u64),
            )
            .unwrap();
            let book = state.codebook.as_ref().unwrap();
            for &k in &participants {
                let delta = local_train(
                    &model_before,
                    &data.shards[k],
                    cfg.eta_l,
                    cfg.local_iters,
                    cfg.batch,
                    seed::derive_seed(7, "local", (round * cfg.devices + k) as u64),
                )
                .unwrap();
                let s_bar = before[k].compensate(&delta).unwrap();
                let (_, q) = book.encode(&s_bar).unwrap();
                for i in 0..delta.len() {
                    let expect = delta[i] + before[k].residual()[i] - q[i];
                    assert!(
                        (state.device_errors[k].residual()[i] - expect).abs() < 1e-12,
                        "device {k} round {round} entry {i}"
                    );
                }
            }
        }
    }

    #[test]
    fn fade_threshold_can_skip_a_round() {
        let mut cfg = small_cfg();
        cfg.eps_h = 1e6; // nobody survives
        let data = build_data::<f64>(&cfg, 12).unwrap();
        let mut state = FeelState::<f64>::new(Scheme::PerfectAgg, &cfg, 12).unwrap();
        let before = state.model.clone();
        let record = run_round(&mut state, &cfg, &data, 0, 12).unwrap();
        assert!(record.skipped);
        assert_eq!(record.symbols_sent, 0);
        assert_eq!(state.model, before, "skipped round leaves the model alone");
    }

    #[test]
    fn separable_task_converges_to_perfect_accuracy() {
        let mut cfg = small_cfg();
        cfg.center_scale = 4.0; // widely separated blobs
        let data = build_data::<f64>(&cfg, 13).unwrap();
        let records = run_arm::<f64>(Scheme::Ifed, &cfg, &data, 60, 13).unwrap();
        assert_eq!(records.last().unwrap().test_accuracy, 1.0);
    }

    #[test]
    fn deterministic_replay() {
        let cfg = small_cfg();
        let data = build_data::<f64>(&cfg, 8).unwrap();
        let a = run_arm::<f64>(Scheme::MdAirComp, &cfg, &data, 3, 8).unwrap();
        let b = run_arm::<f64>(Scheme::MdAirComp, &cfg, &data, 3, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ideal_channel_matches_perfect_aggregation() {
        let mut cfg = small_cfg();
        cfg.ideal_channel = true;
        let data = build_data::<f64>(&cfg, 9).unwrap();
        let mut pa = FeelState::<f64>::new(Scheme::PerfectAgg, &cfg, 9).unwrap();
        let mut air = FeelState::<f64>::new(Scheme::MdAirComp, &cfg, 9).unwrap();
        for round in 0..5 {
            run_round(&mut pa, &cfg, &data, round, 9).unwrap();
            run_round(&mut air, &cfg, &data, round, 9).unwrap();
            for (a, b) in air.model.weights.iter().zip(&pa.model.weights) {
                assert!(
                    (a - b).abs() < 1e-6,
                    "round {round}: {a} vs {b}"
                );
            }
        }
    }
}
