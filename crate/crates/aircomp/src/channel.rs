//! Uplink multiple-access channel simulation.
//!
//! Rayleigh-fading gains, deep-fade participation thresholding,
//! channel-inversion pre-equalization referenced to the first receive
//! antenna, superposition of the selected sequences, and AWGN at a
//! configured SNR. An optional residual phase offset per device models
//! imperfect channel estimation (unit-amplitude residual).

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::modcodebook::ModCodebook;
use crate::scalar::Real;
use crate::seed;

/// Fading realization for `K` devices and `M` receive antennas, entries
/// i.i.d. circularly-symmetric complex Gaussian with unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T> {
    gains: Mat<Complex<T>>,
}

impl<T: Real> ChannelRealization<T> {
    /// Draw a `K x M` realization; reproducible under `seed`.
    pub fn sample(devices: usize, antennas: usize, master_seed: u64) -> Result<Self> {
        if devices == 0 || antennas == 0 {
            return Err(Error::InvalidParameter {
                name: "channel shape",
                reason: format!("devices={devices}, antennas={antennas}"),
            });
        }
        let mut rng = seed::rng_for(master_seed, "channel", 0);
        let half = T::from_f64_lossy(0.5f64.sqrt());
        // Row-major draw order (device-by-device) so adding antennas does not
        // reshuffle earlier devices' gains.
        let mut gains = Mat::filled(devices, antennas, Complex::new(T::zero(), T::zero()));
        for k in 0..devices {
            for m in 0..antennas {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                gains.set(
                    k,
                    m,
                    Complex::new(
                        T::from_f64_lossy(re) * half,
                        T::from_f64_lossy(im) * half,
                    ),
                );
            }
        }
        Ok(Self { gains })
    }

    pub fn devices(&self) -> usize {
        self.gains.rows()
    }

    pub fn antennas(&self) -> usize {
        self.gains.cols()
    }

    /// Gain from device `k` to antenna `m`.
    pub fn gain(&self, device: usize, antenna: usize) -> Complex<T> {
        self.gains.get(device, antenna)
    }

    /// Dump as CSV (one device per row, interleaved re/im per antenna).
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "devices,antennas")?;
        writeln!(out, "{},{}", self.devices(), self.antennas())?;
        for k in 0..self.devices() {
            let row: Vec<String> = (0..self.antennas())
                .flat_map(|m| {
                    let z = self.gain(k, m);
                    [
                        format!("{:?}", z.re.to_f64_lossy()),
                        format!("{:?}", z.im.to_f64_lossy()),
                    ]
                })
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Ground truth of one transmitted block: integer selection counts (the
/// first column of the equivalent signal) plus the full `N x M` equivalent
/// transmit matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentSignal<T> {
    /// Number of devices that selected each sequence.
    pub counts: Vec<u32>,
    /// Equivalent transmit signal; with perfect CSI its first column equals
    /// `counts` exactly and all columns share the same row support.
    pub x_full: Mat<Complex<T>>,
}

/// Received `L x M` block plus the realized noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedBlock<T> {
    pub y: Mat<Complex<T>>,
    pub noise_var: T,
}

/// Uniformly sample `ceil(activity_ratio * K)` of `candidates`, then drop
/// any whose first-antenna gain magnitude falls below `eps_h`. The surviving
/// set is returned sorted; an empty survivor set is the "no participants"
/// signal (the caller skips the round).
pub fn select_participants<T: Real>(
    candidates: &[usize],
    activity_ratio: f64,
    h: &ChannelRealization<T>,
    eps_h: T,
    master_seed: u64,
) -> Result<Vec<usize>> {
    if !(activity_ratio > 0.0 && activity_ratio <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "activity_ratio",
            reason: format!("{activity_ratio} not in (0, 1]"),
        });
    }
    if eps_h < T::zero() {
        return Err(Error::InvalidParameter {
            name: "eps_h",
            reason: "must be nonnegative".into(),
        });
    }
    let n_active = ((activity_ratio * candidates.len() as f64).ceil() as usize).min(candidates.len());
    let mut rng = seed::rng_for(master_seed, "participants", 0);
    let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), n_active)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    chosen.sort_unstable();
    chosen.retain(|&k| h.gain(k, 0).norm() >= eps_h);
    if chosen.is_empty() {
        return Err(Error::NoParticipants);
    }
    Ok(chosen)
}

/// Total channel-inversion transmit power `sum_k 1/|h_k1|^2` a participant
/// set would spend on pre-equalization. Reported per round as a diagnostic;
/// the fade threshold is the only cap applied.
pub fn inversion_power<T: Real>(h: &ChannelRealization<T>, participants: &[usize]) -> T {
    participants
        .iter()
        .map(|&k| T::one() / h.gain(k, 0).norm_sqr())
        .fold(T::zero(), |a, b| a + b)
}

/// Transmit one block: every `(device, sequence_index)` pair contributes its
/// pre-equalized one-hot selection, the superposition passes through the
/// codebook, and AWGN is added at `snr_db` (use `f64::INFINITY` to disable
/// noise). When `phase_max > 0`, each device's pre-equalized contribution is
/// rotated by `exp(j*phi_k)` with `phi_k ~ Uniform(0, phase_max)`, modelling
/// a unit-amplitude residual after imperfect channel estimation.
pub fn transmit_block<T: Real>(
    p: &ModCodebook<T>,
    selections: &[(usize, usize)],
    h: &ChannelRealization<T>,
    snr_db: f64,
    phase_max: f64,
    master_seed: u64,
) -> Result<(ReceivedBlock<T>, EquivalentSignal<T>)> {
    if selections.is_empty() {
        return Err(Error::NoParticipants);
    }
    let (l, n, m) = (p.seq_len(), p.size(), h.antennas());
    let zero = Complex::new(T::zero(), T::zero());

    let mut phase_rng = seed::rng_for(master_seed, "phase", 0);
    let mut counts = vec![0u32; n];
    let mut x_full = Mat::filled(n, m, zero);
    for &(device, index) in selections {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, size: n });
        }
        let h1 = h.gain(device, 0);
        if h1 == zero {
            return Err(Error::ZeroChannelGain { device });
        }
        counts[index] += 1;
        let residual = if phase_max > 0.0 {
            let phi = phase_rng.random::<f64>() * phase_max;
            Complex::new(T::from_f64_lossy(phi.cos()), T::from_f64_lossy(phi.sin()))
        } else {
            Complex::new(T::one(), T::zero())
        };
        for ant in 0..m {
            // h_k1 / h_k1 is exactly 1 + 0j, so with perfect CSI the first
            // column accumulates exact integer counts.
            let ratio = h.gain(device, ant) / h1;
            let cur = x_full.get(index, ant);
            x_full.set(index, ant, cur + residual * ratio);
        }
    }

    // Noiseless superposition P * X.
    let mut signal = Mat::filled(l, m, zero);
    for ant in 0..m {
        let x_col = x_full.col(ant).to_vec();
        let out = signal.col_mut(ant);
        for (idx, &x) in x_col.iter().enumerate() {
            if x != zero {
                for (o, &pv) in out.iter_mut().zip(p.sequence(idx)?) {
                    *o = *o + pv * x;
                }
            }
        }
    }

    // Per-block empirical SNR definition: sigma_n^2 = ||P X||_F^2 / (L M snr).
    let power: T = signal.as_slice().iter().map(|z| z.norm_sqr()).sum();
    let noise_var = if snr_db.is_infinite() {
        T::zero()
    } else {
        let snr_lin = T::from_f64_lossy(10f64.powf(snr_db / 10.0));
        power / (T::from_f64_lossy((l * m) as f64) * snr_lin)
    };

    let mut y = signal;
    if noise_var > T::zero() {
        let mut noise_rng = seed::rng_for(master_seed, "noise", 0);
        let sigma = (noise_var / T::from_f64_lossy(2.0)).sqrt();
        for z in y.as_mut_slice() {
            let re: f64 = StandardNormal.sample(&mut noise_rng);
            let im: f64 = StandardNormal.sample(&mut noise_rng);
            *z = *z
                + Complex::new(
                    T::from_f64_lossy(re) * sigma,
                    T::from_f64_lossy(im) * sigma,
                );
        }
    }

    Ok((
        ReceivedBlock { y, noise_var },
        EquivalentSignal { counts, x_full },
    ))
}
