//! AMP-based detection of superposed sequence selections.
//!
//! The receiver observes `Y = P X + Z` per block and wants the first column
//! of `X`: the integer count of devices that transmitted each sequence. The
//! detector decouples the linear mixing into per-entry scalar problems,
//! applies an integer-count prior on the pre-equalized antenna and a
//! Bernoulli-Gaussian prior on the remaining antennas, learns the
//! hyper-parameters by expectation maximization, damps the factor-node
//! quantities, and stops once the residual stops improving. Per-block
//! majority vote over the rounded count sums estimates the number of active
//! devices.

use std::collections::BTreeMap;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::modcodebook::ModCodebook;
use crate::quantizer::QuantCodebook;
use crate::scalar::Real;

/// Numerical floor for variances and denominators.
const EPS: f64 = 1e-12;

/// How the early-stop residual is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualRule {
    /// Each block iterates and stops on its own residual (parallel friendly).
    #[default]
    PerBlock,
    /// All blocks iterate in lockstep and stop on the mean residual.
    Joint,
}

/// Detector configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    /// Maximum AMP iterations.
    pub max_iters: usize,
    /// Damping factor in `[0, 1)` blending successive factor-node values.
    pub damping: f64,
    /// Upper count bound used by the integer prior. The base station uses a
    /// fixed fraction of the device population when the true number of
    /// active devices is unknown.
    pub ka_prior: usize,
    /// Iterations to run before the residual-based stop may trigger.
    pub min_iters_before_stop: usize,
    /// Early-stop policy across blocks.
    pub residual_rule: ResidualRule,
}

impl DetectorConfig {
    pub fn new(ka_prior: usize) -> Self {
        Self {
            max_iters: 50,
            damping: 0.3,
            ka_prior,
            min_iters_before_stop: 15,
            residual_rule: ResidualRule::PerBlock,
        }
    }

    /// Prior bound from the device population: `ceil(0.4 K)`.
    pub fn for_device_count(devices: usize) -> Self {
        Self::new((0.4 * devices as f64).ceil() as usize)
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iters",
                reason: "must be at least 1".into(),
            });
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidParameter {
                name: "damping",
                reason: format!("{} not in [0, 1)", self.damping),
            });
        }
        if self.ka_prior == 0 {
            return Err(Error::InvalidParameter {
                name: "ka_prior",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Posterior of one count entry under the discrete prior
/// `(1-a) d(x) + (a/K) sum_{s=1..K} d(x-s)` with a complex Gaussian
/// likelihood `CN(r; s, phi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountPosterior<T> {
    pub mean: T,
    pub var: T,
    /// Posterior probability that the entry is nonzero.
    pub nonzero_prob: T,
}

/// Count-prior denoiser for the pre-equalized antenna. Weights are formed in
/// the log domain and normalized over the full support `{0, 1, ..., k_max}`.
pub fn denoise_count_prior<T: Real>(
    r: Complex<T>,
    phi: T,
    a: T,
    k_max: usize,
) -> CountPosterior<T> {
    let phi = phi.max(T::from_f64_lossy(EPS));
    if a <= T::zero() {
        return CountPosterior {
            mean: T::zero(),
            var: T::zero(),
            nonzero_prob: T::zero(),
        };
    }
    let a = a.min(T::one());
    // log weights, dropping the common -ln(pi*phi) factor.
    let ln_a_each = a.ln() - T::from_f64_lossy(k_max as f64).ln();
    let one_minus_a = T::one() - a;
    let mut log_w = Vec::with_capacity(k_max + 1);
    log_w.push(if one_minus_a > T::zero() {
        one_minus_a.ln() - r.norm_sqr() / phi
    } else {
        T::neg_infinity()
    });
    for s in 1..=k_max {
        let d = r - Complex::new(T::from_f64_lossy(s as f64), T::zero());
        log_w.push(ln_a_each - d.norm_sqr() / phi);
    }
    let max = log_w
        .iter()
        .cloned()
        .fold(T::neg_infinity(), |m, w| if w > m { w } else { m });
    let mut z = T::zero();
    let mut m1 = T::zero();
    for (s, &lw) in log_w.iter().enumerate() {
        let w = (lw - max).exp();
        z = z + w * T::one();
        m1 = m1 + w * T::from_f64_lossy(s as f64);
    }
    let mean = m1 / z;
    // Two-pass central moment avoids the cancellation of E[s^2] - mean^2.
    let mut spread = T::zero();
    for (s, &lw) in log_w.iter().enumerate() {
        let d = T::from_f64_lossy(s as f64) - mean;
        spread = spread + (lw - max).exp() * d * d;
    }
    let var = (spread / z).max(T::zero());
    let nonzero_prob = (T::one() - (log_w[0] - max).exp() / z).max(T::zero());
    CountPosterior {
        mean,
        var,
        nonzero_prob,
    }
}

/// Posterior of one entry under the spike-and-slab prior
/// `(1-a) d(x) + a CN(x; mu0, tau0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussPosterior<T> {
    pub mean: Complex<T>,
    pub var: T,
    /// Posterior nonzero probability.
    pub pi: T,
    /// Conditional (slab) mean, kept for the hyper-parameter updates.
    pub mu: Complex<T>,
    /// Conditional (slab) variance.
    pub tau: T,
}

/// Bernoulli-Gaussian denoiser for the non-pre-equalized antennas. The slab
/// posterior is the Gaussian product `mu = (mu0 phi + tau0 r) / (phi + tau0)`,
/// `tau = tau0 phi / (phi + tau0)`; the nonzero probability is computed
/// through a stable sigmoid of the log-likelihood ratio.
pub fn denoise_bernoulli_gauss<T: Real>(
    r: Complex<T>,
    phi: T,
    a: T,
    mu0: Complex<T>,
    tau0: T,
) -> GaussPosterior<T> {
    let phi = phi.max(T::from_f64_lossy(EPS));
    let tau0 = tau0.max(T::from_f64_lossy(EPS));
    let denom = phi + tau0;
    let mu = (mu0 * phi + r * tau0) / denom;
    let tau = tau0 * phi / denom;
    if a <= T::zero() {
        return GaussPosterior {
            mean: Complex::new(T::zero(), T::zero()),
            var: T::zero(),
            pi: T::zero(),
            mu,
            tau,
        };
    }
    let pi = if a >= T::one() {
        T::one()
    } else {
        // L = ln(phi/(tau0+phi)) - |r-mu0|^2/(tau0+phi) + |r|^2/phi
        let lr = (phi / denom).ln() - (r - mu0).norm_sqr() / denom + r.norm_sqr() / phi;
        let logit = a.ln() - (T::one() - a).ln() + lr;
        let floor = T::from_f64_lossy(EPS);
        sigmoid(logit).max(floor).min(T::one() - floor)
    };
    let mean = mu * pi;
    // pi (|mu|^2 + tau) - |pi mu|^2 expanded to its cancellation-free form.
    let var = (pi * (T::one() - pi) * mu.norm_sqr() + pi * tau).max(T::zero());
    GaussPosterior {
        mean,
        var,
        pi,
        mu,
        tau,
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// All per-iteration AMP quantities for one block.
#[derive(Debug, Clone)]
pub struct AmpState<T> {
    /// Posterior means, `N x M`.
    pub x_hat: Mat<Complex<T>>,
    /// Posterior variances, `N x M`.
    pub v_hat: Mat<T>,
    /// Factor-node variances (damped), `L x M`.
    pub v: Mat<T>,
    /// Factor-node means (damped), `L x M`.
    pub z: Mat<Complex<T>>,
    /// Decoupled-channel noise levels, `N x M`.
    pub phi: Mat<T>,
    /// Decoupled-channel observations, `N x M`.
    pub r: Mat<Complex<T>>,
    /// Common per-row activity indicators, length `N`.
    pub activity: Vec<T>,
    /// Learned noise variance.
    pub noise_var: T,
    /// Slab mean of the Bernoulli-Gaussian prior.
    pub mu0: Complex<T>,
    /// Slab variance of the Bernoulli-Gaussian prior.
    pub tau0: T,
    /// Completed iterations.
    pub iter: usize,
    /// Residual of the last completed iteration.
    pub residual: f64,
    /// Nonzero-probability scratch from the last denoise pass (per entry).
    pi: Mat<T>,
    /// Slab means from the last denoise pass (antennas 2..M).
    mu: Mat<Complex<T>>,
    /// Slab variances from the last denoise pass.
    tau: Mat<T>,
}

/// Precomputed per-codebook quantities shared by every block.
struct AmpContext<'a, T> {
    p: &'a ModCodebook<T>,
    /// Entry-wise `|P|^2`, `L x N`.
    p_abs2: Mat<T>,
    cfg: DetectorConfig,
}

impl<'a, T: Real> AmpContext<'a, T> {
    fn new(p: &'a ModCodebook<T>, cfg: DetectorConfig) -> Self {
        let l = p.seq_len();
        let p_abs2 = Mat::from_fn(l, p.size(), |row, col| p.sequence(col).unwrap()[row].norm_sqr());
        Self { p, p_abs2, cfg }
    }
}

impl<T: Real> AmpState<T> {
    /// Initial state: neutral activity 0.5, noise variance 100, unit
    /// factor-node variances, `Z` anchored at the observation.
    fn init(y: &Mat<Complex<T>>, n: usize) -> Self {
        let (l, m) = (y.rows(), y.cols());
        let zero_c = Complex::new(T::zero(), T::zero());
        Self {
            x_hat: Mat::filled(n, m, zero_c),
            v_hat: Mat::filled(n, m, T::one()),
            v: Mat::filled(l, m, T::one()),
            z: y.clone(),
            phi: Mat::filled(n, m, T::one()),
            r: Mat::filled(n, m, zero_c),
            activity: vec![T::from_f64_lossy(0.5); n],
            noise_var: T::from_f64_lossy(100.0),
            mu0: zero_c,
            tau0: T::one(),
            iter: 0,
            residual: f64::INFINITY,
            pi: Mat::filled(n, m, T::zero()),
            mu: Mat::filled(n, m, zero_c),
            tau: Mat::filled(n, m, T::zero()),
        }
    }

    /// One decoupling pass: fresh factor-node `V`, `Z`, then variable-node
    /// `phi`, `r` from the fresh values, and finally the damped `V`, `Z`
    /// stored as the memory the next iteration corrects against.
    fn decouple(&mut self, y: &Mat<Complex<T>>, ctx: &AmpContext<T>) {
        let (l, m) = (y.rows(), y.cols());
        let n = self.x_hat.rows();
        let eps = T::from_f64_lossy(EPS);
        let damp = T::from_f64_lossy(ctx.cfg.damping);
        let keep = T::one() - damp;

        for ant in 0..m {
            // Fresh factor-node quantities.
            let mut v_new = vec![T::zero(); l];
            let mut z_new = vec![Complex::new(T::zero(), T::zero()); l];
            for seq in 0..n {
                let vh = self.v_hat.get(seq, ant);
                let xh = self.x_hat.get(seq, ant);
                let pa = ctx.p_abs2.col(seq);
                let pc = ctx.p.sequence(seq).unwrap();
                for row in 0..l {
                    v_new[row] = v_new[row] + pa[row] * vh;
                    z_new[row] = z_new[row] + pc[row] * xh;
                }
            }
            let v_prev = self.v.col(ant).to_vec();
            let z_prev = self.z.col(ant).to_vec();
            let y_col = y.col(ant);
            for row in 0..l {
                let gain = (y_col[row] - z_prev[row]) / (self.noise_var + v_prev[row]).max(eps);
                z_new[row] = z_new[row] - gain * v_new[row];
            }

            // Variable-node quantities from the fresh (undamped) values.
            let mut inv_d = vec![T::zero(); l];
            let mut scaled = vec![Complex::new(T::zero(), T::zero()); l];
            for row in 0..l {
                let d = (self.noise_var + v_new[row]).max(eps);
                inv_d[row] = T::one() / d;
                scaled[row] = (y_col[row] - z_new[row]) * inv_d[row];
            }
            for seq in 0..n {
                let pa = ctx.p_abs2.col(seq);
                let pc = ctx.p.sequence(seq).unwrap();
                let mut acc = T::zero();
                let mut corr = Complex::new(T::zero(), T::zero());
                for row in 0..l {
                    acc = acc + pa[row] * inv_d[row];
                    corr = corr + pc[row].conj() * scaled[row];
                }
                let phi = (T::one() / acc.max(eps)).max(eps);
                self.phi.set(seq, ant, phi);
                self.r
                    .set(seq, ant, self.x_hat.get(seq, ant) + corr * phi);
            }

            // Damped factor-node memory for the next iteration.
            for row in 0..l {
                self.v.col_mut(ant)[row] = damp * v_prev[row] + keep * v_new[row];
                self.z.col_mut(ant)[row] = z_prev[row] * damp + z_new[row] * keep;
            }
        }
    }

    /// Denoise every entry (count prior on antenna 0, Bernoulli-Gaussian on
    /// the rest), then damp the posterior means toward the previous
    /// iterate. Without the mean damping the loop oscillates at high SNR
    /// and never tightens past roughly -10 dB.
    fn denoise(&mut self, ctx: &AmpContext<T>) {
        let n = self.x_hat.rows();
        let m = self.x_hat.cols();
        let damp = T::from_f64_lossy(ctx.cfg.damping);
        let keep = T::one() - damp;
        let x_prev = self.x_hat.clone();
        for seq in 0..n {
            let a = self.activity[seq];
            let post = denoise_count_prior(
                self.r.get(seq, 0),
                self.phi.get(seq, 0),
                a,
                ctx.cfg.ka_prior,
            );
            self.x_hat
                .set(seq, 0, Complex::new(post.mean, T::zero()));
            self.v_hat.set(seq, 0, post.var);
            self.pi.set(seq, 0, post.nonzero_prob);
            for ant in 1..m {
                let post = denoise_bernoulli_gauss(
                    self.r.get(seq, ant),
                    self.phi.get(seq, ant),
                    a,
                    self.mu0,
                    self.tau0,
                );
                self.x_hat.set(seq, ant, post.mean);
                self.v_hat.set(seq, ant, post.var);
                self.pi.set(seq, ant, post.pi);
                self.mu.set(seq, ant, post.mu);
                self.tau.set(seq, ant, post.tau);
            }
        }
        for (x, p0) in self.x_hat.as_mut_slice().iter_mut().zip(x_prev.as_slice()) {
            *x = *p0 * damp + *x * keep;
        }
    }

    /// EM pass: refresh the activity indicators (averaged across antennas),
    /// the noise variance, and the slab mean/variance (which only the
    /// antennas without pre-equalization inform).
    fn em_update(&mut self, y: &Mat<Complex<T>>) {
        let n = self.x_hat.rows();
        let m = self.x_hat.cols();
        let inv_m = T::one() / T::from_f64_lossy(m as f64);
        for seq in 0..n {
            let mut acc = T::zero();
            for ant in 0..m {
                acc = acc + self.pi.get(seq, ant);
            }
            self.activity[seq] = (acc * inv_m).max(T::zero()).min(T::one());
        }

        self.noise_var = em_noise_variance(y, &self.z, &self.v, self.noise_var)
            .max(T::from_f64_lossy(EPS));

        if m > 1 {
            let mut pi_sum = T::zero();
            let mut mu_acc = Complex::new(T::zero(), T::zero());
            for ant in 1..m {
                for seq in 0..n {
                    let pi = self.pi.get(seq, ant);
                    pi_sum = pi_sum + pi;
                    mu_acc = mu_acc + self.mu.get(seq, ant) * pi;
                }
            }
            if pi_sum > T::from_f64_lossy(EPS) {
                let mu0 = mu_acc / pi_sum;
                let mut tau_acc = T::zero();
                for ant in 1..m {
                    for seq in 0..n {
                        let pi = self.pi.get(seq, ant);
                        let d = mu0 - self.mu.get(seq, ant);
                        tau_acc = tau_acc + pi * (d.norm_sqr() + self.tau.get(seq, ant));
                    }
                }
                self.mu0 = mu0;
                self.tau0 = (tau_acc / pi_sum).max(T::from_f64_lossy(EPS));
            }
        }
    }

    /// Residual `||Y - P x_hat||_F / L` for the current posterior means.
    fn residual_norm(&self, y: &Mat<Complex<T>>, ctx: &AmpContext<T>) -> f64 {
        let (l, m) = (y.rows(), y.cols());
        let n = self.x_hat.rows();
        let mut acc = T::zero();
        let mut recon = vec![Complex::new(T::zero(), T::zero()); l];
        for ant in 0..m {
            recon.iter_mut().for_each(|z| *z = Complex::new(T::zero(), T::zero()));
            for seq in 0..n {
                let xh = self.x_hat.get(seq, ant);
                if xh.norm_sqr() > T::zero() {
                    for (row, &pv) in ctx.p.sequence(seq).unwrap().iter().enumerate() {
                        recon[row] = recon[row] + pv * xh;
                    }
                }
            }
            for (row, &rv) in recon.iter().enumerate() {
                acc = acc + (y.col(ant)[row] - rv).norm_sqr();
            }
        }
        acc.to_f64_lossy().sqrt() / l as f64
    }

    fn is_finite(&self) -> bool {
        self.x_hat.as_slice().iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && self.noise_var.is_finite()
    }
}

/// EM closed form for the noise variance, averaged over the `L x M`
/// observation entries:
/// `1/(LM) sum |Y - Z|^2 / (1 + V/s2)^2 + s2 V / (V + s2)`.
pub fn em_noise_variance<T: Real>(
    y: &Mat<Complex<T>>,
    z: &Mat<Complex<T>>,
    v: &Mat<T>,
    sigma2: T,
) -> T {
    let (l, m) = (y.rows(), y.cols());
    let eps = T::from_f64_lossy(EPS);
    let s2 = sigma2.max(eps);
    let mut acc = T::zero();
    for (idx, &yv) in y.as_slice().iter().enumerate() {
        let zv = z.as_slice()[idx];
        let vv = v.as_slice()[idx];
        let shrink = T::one() + vv / s2;
        acc = acc + (yv - zv).norm_sqr() / (shrink * shrink) + s2 * vv / (vv + s2).max(eps);
    }
    acc / T::from_f64_lossy((l * m) as f64)
}

/// One row of per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub iter: usize,
    pub residual: f64,
    pub sigma2: f64,
    pub tau0: f64,
    pub mu0_abs: f64,
    pub activity_sum: f64,
}

/// Detection result for one block.
#[derive(Debug, Clone)]
pub struct Detection<T> {
    /// Posterior-mean counts (first column of the equivalent signal), left
    /// unrounded for aggregation.
    pub counts: Vec<T>,
    /// Full posterior-mean equivalent signal, `N x M`.
    pub x_hat: Mat<Complex<T>>,
    /// Per-iteration diagnostics.
    pub trace: Vec<IterTrace>,
    /// Iterations actually run.
    pub iters: usize,
    /// Residual of the returned iterate.
    pub residual: f64,
}

fn check_dims<T: Real>(y: &Mat<Complex<T>>, p: &ModCodebook<T>) -> Result<()> {
    if y.rows() != p.seq_len() {
        return Err(Error::DimensionMismatch {
            context: "received block",
            expected: p.seq_len(),
            got: y.rows(),
        });
    }
    Ok(())
}

fn trace_row<T: Real>(state: &AmpState<T>, residual: f64) -> IterTrace {
    IterTrace {
        iter: state.iter,
        residual,
        sigma2: state.noise_var.to_f64_lossy(),
        tau0: state.tau0.to_f64_lossy(),
        mu0_abs: state.mu0.norm().to_f64_lossy(),
        activity_sum: state
            .activity
            .iter()
            .fold(T::zero(), |a, &b| a + b)
            .to_f64_lossy(),
    }
}

fn extract_counts<T: Real>(x_hat: &Mat<Complex<T>>) -> Vec<T> {
    x_hat.col(0).iter().map(|z| z.re).collect()
}

/// Detect a single received block.
pub fn detect_block<T: Real>(
    y: &Mat<Complex<T>>,
    p: &ModCodebook<T>,
    cfg: &DetectorConfig,
) -> Result<Detection<T>> {
    cfg.validate()?;
    check_dims(y, p)?;
    let ctx = AmpContext::new(p, *cfg);
    let mut state = AmpState::init(y, p.size());
    let mut trace = Vec::new();
    let mut last_residual = f64::INFINITY;
    let mut snapshot = state.x_hat.clone();

    for i in 1..=cfg.max_iters {
        state.iter = i;
        state.decouple(y, &ctx);
        state.denoise(&ctx);
        state.em_update(y);
        let residual = state.residual_norm(y, &ctx);
        if !state.is_finite() || !residual.is_finite() {
            return Err(Error::Diverged { iter: i });
        }
        trace.push(trace_row(&state, residual));
        if i > cfg.min_iters_before_stop && residual >= last_residual {
            // Return the previous iterate: its residual is the best so far.
            return Ok(Detection {
                counts: extract_counts(&snapshot),
                x_hat: snapshot,
                trace,
                iters: i,
                residual: last_residual,
            });
        }
        snapshot = state.x_hat.clone();
        last_residual = residual;
        state.residual = residual;
    }
    Ok(Detection {
        counts: extract_counts(&state.x_hat),
        x_hat: state.x_hat,
        trace,
        iters: cfg.max_iters,
        residual: last_residual,
    })
}

/// Detect a group of blocks under the configured residual rule. `PerBlock`
/// detects each block independently; `Joint` iterates all blocks in lockstep
/// and stops every block when the blockwise-mean residual stops decreasing.
pub fn detect_blocks<T: Real>(
    ys: &[Mat<Complex<T>>],
    p: &ModCodebook<T>,
    cfg: &DetectorConfig,
) -> Result<Vec<Detection<T>>> {
    cfg.validate()?;
    match cfg.residual_rule {
        ResidualRule::PerBlock => ys.iter().map(|y| detect_block(y, p, cfg)).collect(),
        ResidualRule::Joint => {
            for y in ys {
                check_dims(y, p)?;
            }
            let ctx = AmpContext::new(p, *cfg);
            let mut states: Vec<AmpState<T>> =
                ys.iter().map(|y| AmpState::init(y, p.size())).collect();
            let mut traces: Vec<Vec<IterTrace>> = vec![Vec::new(); ys.len()];
            let mut snapshots: Vec<Mat<Complex<T>>> =
                states.iter().map(|s| s.x_hat.clone()).collect();
            let mut last_mean = f64::INFINITY;
            let mut last_per_block = vec![f64::INFINITY; ys.len()];
            let mut iters = cfg.max_iters;
            for i in 1..=cfg.max_iters {
                let mut mean_residual = 0.0;
                let mut per_block = vec![0.0; ys.len()];
                for (d, state) in states.iter_mut().enumerate() {
                    state.iter = i;
                    state.decouple(&ys[d], &ctx);
                    state.denoise(&ctx);
                    state.em_update(&ys[d]);
                    let residual = state.residual_norm(&ys[d], &ctx);
                    if !state.is_finite() || !residual.is_finite() {
                        return Err(Error::Diverged { iter: i });
                    }
                    traces[d].push(trace_row(state, residual));
                    per_block[d] = residual;
                    mean_residual += residual;
                }
                mean_residual /= ys.len() as f64;
                if i > cfg.min_iters_before_stop && mean_residual >= last_mean {
                    iters = i;
                    return Ok(snapshots
                        .into_iter()
                        .zip(traces)
                        .zip(last_per_block)
                        .map(|((x_hat, trace), residual)| Detection {
                            counts: extract_counts(&x_hat),
                            x_hat,
                            trace,
                            iters,
                            residual,
                        })
                        .collect());
                }
                for (snap, state) in snapshots.iter_mut().zip(&states) {
                    *snap = state.x_hat.clone();
                }
                last_mean = mean_residual;
                last_per_block = per_block;
            }
            Ok(states
                .into_iter()
                .zip(traces)
                .zip(last_per_block)
                .map(|((state, trace), residual)| Detection {
                    counts: extract_counts(&state.x_hat),
                    x_hat: state.x_hat,
                    trace,
                    iters,
                    residual,
                })
                .collect())
        }
    }
}

/// Write a detection trace as CSV for convergence debugging.
pub fn write_trace_csv<W: std::io::Write>(trace: &[IterTrace], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iter,residual,sigma2,tau0,mu0_abs,activity_sum")?;
    for row in trace {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?}",
            row.iter, row.residual, row.sigma2, row.tau0, row.mu0_abs, row.activity_sum
        )?;
    }
    Ok(())
}

/// Majority-vote estimate of the number of active devices: round each
/// block's count sum to the nearest integer and take the most frequent
/// value, ties toward the larger count.
pub fn estimate_ka<T: Real>(count_blocks: &[Vec<T>]) -> usize {
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for counts in count_blocks {
        *votes.entry(rounded_l1(counts)).or_insert(0) += 1;
    }
    votes
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(&k, _)| k)
        .unwrap_or(0)
}

/// Mean estimate: round the blockwise-average count sum.
pub fn estimate_ka_mean<T: Real>(count_blocks: &[Vec<T>]) -> usize {
    if count_blocks.is_empty() {
        return 0;
    }
    let total: f64 = count_blocks
        .iter()
        .map(|c| l1(c).to_f64_lossy())
        .sum::<f64>();
    (total / count_blocks.len() as f64 + 0.5).floor().max(0.0) as usize
}

fn l1<T: Real>(counts: &[T]) -> T {
    counts.iter().fold(T::zero(), |a, &b| a + b.abs())
}

fn rounded_l1<T: Real>(counts: &[T]) -> usize {
    (l1(counts).to_f64_lossy() + 0.5).floor().max(0.0) as usize
}

/// Reassemble the aggregated update: `s = (1/ka) concat_d(U x_d)` truncated
/// to `w` entries.
pub fn aggregate<T: Real>(
    u: &QuantCodebook<T>,
    count_blocks: &[Vec<T>],
    ka_hat: usize,
    w: usize,
) -> Result<Vec<T>> {
    if ka_hat == 0 {
        return Err(Error::NoActiveDevices);
    }
    let q = u.block_dim();
    let inv_ka = T::one() / T::from_f64_lossy(ka_hat as f64);
    let mut out = Vec::with_capacity(count_blocks.len() * q);
    for counts in count_blocks {
        if counts.len() != u.size() {
            return Err(Error::DimensionMismatch {
                context: "aggregate counts",
                expected: u.size(),
                got: counts.len(),
            });
        }
        let mut block = vec![T::zero(); q];
        for (n, &c) in counts.iter().enumerate() {
            if c != T::zero() {
                for (b, &cw) in block.iter_mut().zip(u.codeword(n)) {
                    *b = *b + cw * c;
                }
            }
        }
        out.extend(block.into_iter().map(|x| x * inv_ka));
    }
    if out.len() < w {
        return Err(Error::DimensionMismatch {
            context: "aggregate output",
            expected: w,
            got: out.len(),
        });
    }
    out.truncate(w);
    Ok(out)
}
