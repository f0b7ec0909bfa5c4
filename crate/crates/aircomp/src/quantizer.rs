//! Shared vector-quantization codebook.
//!
//! All devices quantize their (error-compensated) update vectors against the
//! same `Q x N` codebook, learned each round with k-means++ at the base
//! station. A length-`W` vector is zero-padded to `D = ceil(W/Q)` blocks of
//! `Q` entries; each block maps to the nearest codeword by Euclidean
//! distance, ties broken toward the lowest index. Indices are zero-based.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Default Lloyd iteration budget when learning a codebook.
pub const DEFAULT_KMEANS_ITERS: usize = 50;

/// A `Q x N` codebook of `N` codewords, each of dimension `Q`.
///
/// Codewords are stored contiguously (column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantCodebook<T> {
    block_dim: usize,
    size: usize,
    data: Vec<T>,
}

/// Quantization indices for one update vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVector {
    /// Zero-based codeword index per block, length `D = ceil(W/Q)`.
    pub indices: Vec<usize>,
    /// Number of zero-padded scalar slots in the final block.
    pub padded_zeros: usize,
}

/// Per-device accumulated quantization error.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState<T> {
    residual: Vec<T>,
}

impl<T: Real> ErrorState<T> {
    /// All-zero residual of dimension `w` (round-0 state).
    pub fn zeros(w: usize) -> Self {
        Self {
            residual: vec![T::zero(); w],
        }
    }

    pub fn residual(&self) -> &[T] {
        &self.residual
    }

    /// Error-compensated update `delta + e`.
    pub fn compensate(&self, delta: &[T]) -> Result<Vec<T>> {
        if delta.len() != self.residual.len() {
            return Err(Error::DimensionMismatch {
                context: "error compensation",
                expected: self.residual.len(),
                got: delta.len(),
            });
        }
        Ok(delta
            .iter()
            .zip(&self.residual)
            .map(|(&d, &e)| d + e)
            .collect())
    }

    /// Refine the accumulated error: `e' = delta + e - quantized`.
    pub fn accumulate(&mut self, delta: &[T], quantized: &[T]) -> Result<()> {
        if delta.len() != self.residual.len() || quantized.len() != self.residual.len() {
            return Err(Error::DimensionMismatch {
                context: "error accumulation",
                expected: self.residual.len(),
                got: delta.len().max(quantized.len()),
            });
        }
        for ((e, &d), &q) in self.residual.iter_mut().zip(delta).zip(quantized) {
            *e = d + *e - q;
        }
        Ok(())
    }
}

impl<T: Real> QuantCodebook<T> {
    /// Build directly from codeword columns (mainly for tests and fixtures).
    pub fn from_codewords(block_dim: usize, codewords: &[&[T]]) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::NoTrainingData);
        }
        let mut data = Vec::with_capacity(block_dim * codewords.len());
        for cw in codewords {
            if cw.len() != block_dim {
                return Err(Error::DimensionMismatch {
                    context: "codeword",
                    expected: block_dim,
                    got: cw.len(),
                });
            }
            if cw.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: "codeword",
                });
            }
            data.extend_from_slice(cw);
        }
        Ok(Self {
            block_dim,
            size: codewords.len(),
            data,
        })
    }

    /// Learn `size` codewords from `samples` (flat, `block_dim` entries per
    /// sample) using k-means++ seeding followed by Lloyd iterations, stopping
    /// at an assignment fixpoint or after `max_iters` passes.
    ///
    /// Deterministic for a fixed `seed`. Fails on an empty or non-finite
    /// sample set, and when there are fewer samples than codewords.
    pub fn learn(
        samples: &[T],
        block_dim: usize,
        size: usize,
        max_iters: usize,
        master_seed: u64,
    ) -> Result<Self> {
        if block_dim == 0 || size == 0 {
            return Err(Error::InvalidParameter {
                name: "codebook shape",
                reason: format!("block_dim={block_dim}, size={size}"),
            });
        }
        if samples.is_empty() {
            return Err(Error::NoTrainingData);
        }
        if !samples.len().is_multiple_of(block_dim) {
            return Err(Error::DimensionMismatch {
                context: "training samples",
                expected: block_dim,
                got: samples.len() % block_dim,
            });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "training samples",
            });
        }
        let n_samples = samples.len() / block_dim;
        if n_samples < size {
            return Err(Error::InsufficientSamples {
                needed: size,
                got: n_samples,
            });
        }

        let sample = |i: usize| &samples[i * block_dim..(i + 1) * block_dim];
        let mut rng = seed::rng_for(master_seed, "kmeans", 0);

        // k-means++ seeding: first centroid uniform, the rest proportional to
        // squared distance from the nearest chosen centroid.
        let mut centroids: Vec<T> = Vec::with_capacity(block_dim * size);
        let first = rng.random_range(0..n_samples);
        centroids.extend_from_slice(sample(first));
        let mut dist2: Vec<f64> = (0..n_samples)
            .map(|i| dist_sq(sample(i), sample(first)).to_f64_lossy())
            .collect();
        while centroids.len() < block_dim * size {
            let total: f64 = dist2.iter().sum();
            let pick = if total > 0.0 {
                let mut u = rng.random::<f64>() * total;
                let mut chosen = n_samples - 1;
                for (i, &d) in dist2.iter().enumerate() {
                    u -= d;
                    if u <= 0.0 {
                        chosen = i;
                        break;
                    }
                }
                chosen
            } else {
                // All remaining mass at zero distance: duplicate points.
                rng.random_range(0..n_samples)
            };
            let start = centroids.len();
            centroids.extend_from_slice(sample(pick));
            let new_c = &centroids[start..start + block_dim];
            for (i, d) in dist2.iter_mut().enumerate() {
                let nd = dist_sq(sample(i), new_c).to_f64_lossy();
                if nd < *d {
                    *d = nd;
                }
            }
        }

        let mut book = Self {
            block_dim,
            size,
            data: centroids,
        };

        // Lloyd iterations until the assignment stops changing.
        let mut assign = vec![0usize; n_samples];
        for (i, slot) in assign.iter_mut().enumerate() {
            *slot = book.quantize_block(sample(i))?;
        }
        for _ in 0..max_iters {
            // Update step: mean of each cluster.
            let mut sums = vec![T::zero(); block_dim * size];
            let mut counts = vec![0usize; size];
            for (i, &a) in assign.iter().enumerate() {
                counts[a] += 1;
                for (s, &x) in sums[a * block_dim..(a + 1) * block_dim]
                    .iter_mut()
                    .zip(sample(i))
                {
                    *s = *s + x;
                }
            }
            for c in 0..size {
                if counts[c] == 0 {
                    // Re-seed an empty cluster at the sample farthest from
                    // its assigned centroid.
                    let far = (0..n_samples)
                        .max_by(|&a, &b| {
                            let da = dist_sq(sample(a), book.codeword(assign[a]));
                            let db = dist_sq(sample(b), book.codeword(assign[b]));
                            da.partial_cmp(&db).unwrap()
                        })
                        .unwrap();
                    sums[c * block_dim..(c + 1) * block_dim].copy_from_slice(sample(far));
                    counts[c] = 1;
                    assign[far] = c;
                }
                let inv = T::one() / T::from_f64_lossy(counts[c] as f64);
                for (dst, &s) in book.data[c * block_dim..(c + 1) * block_dim]
                    .iter_mut()
                    .zip(&sums[c * block_dim..(c + 1) * block_dim])
                {
                    *dst = s * inv;
                }
            }
            // Assignment step.
            let mut changed = false;
            for (i, slot) in assign.iter_mut().enumerate() {
                let a = book.quantize_block(sample(i))?;
                if a != *slot {
                    *slot = a;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Ok(book)
    }

    /// Codeword dimension `Q`.
    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// Number of codewords `N`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Codeword at a zero-based index.
    pub fn codeword(&self, index: usize) -> &[T] {
        &self.data[index * self.block_dim..(index + 1) * self.block_dim]
    }

    /// Nearest-codeword index for one block (zero-based); ties go to the
    /// lowest index.
    pub fn quantize_block(&self, block: &[T]) -> Result<usize> {
        if block.len() != self.block_dim {
            return Err(Error::DimensionMismatch {
                context: "quantize block",
                expected: self.block_dim,
                got: block.len(),
            });
        }
        let mut best = 0usize;
        let mut best_d = dist_sq(block, self.codeword(0));
        for i in 1..self.size {
            let d = dist_sq(block, self.codeword(i));
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        Ok(best)
    }

    /// Quantize a length-`W` vector: zero-pad to `D = ceil(W/Q)` blocks,
    /// quantize each block, and return the indices together with the
    /// reconstruction truncated back to `W` entries.
    pub fn encode(&self, s_bar: &[T]) -> Result<(IndexVector, Vec<T>)> {
        if s_bar.is_empty() {
            return Err(Error::NoTrainingData);
        }
        let w = s_bar.len();
        let d = w.div_ceil(self.block_dim);
        let padded = d * self.block_dim - w;
        let mut indices = Vec::with_capacity(d);
        let mut block = vec![T::zero(); self.block_dim];
        for b in 0..d {
            let start = b * self.block_dim;
            for (j, slot) in block.iter_mut().enumerate() {
                *slot = if start + j < w {
                    s_bar[start + j]
                } else {
                    T::zero()
                };
            }
            indices.push(self.quantize_block(&block)?);
        }
        let iv = IndexVector {
            indices,
            padded_zeros: padded,
        };
        let quantized = self.reconstruct(&iv, w)?;
        Ok((iv, quantized))
    }

    /// Concatenate the selected codewords in block order, truncating the
    /// padding so the result has exactly `w` entries.
    pub fn reconstruct(&self, b: &IndexVector, w: usize) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(b.indices.len() * self.block_dim);
        for &i in &b.indices {
            if i >= self.size {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    size: self.size,
                });
            }
            out.extend_from_slice(self.codeword(i));
        }
        if out.len() < w {
            return Err(Error::DimensionMismatch {
                context: "reconstruct",
                expected: w,
                got: out.len(),
            });
        }
        out.truncate(w);
        Ok(out)
    }

    /// Mean squared quantization error of `encode` over a flat sample set.
    pub fn mean_sq_error(&self, samples: &[T]) -> Result<T> {
        let (_, q) = self.encode(samples)?;
        let sum: T = samples
            .iter()
            .zip(&q)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        Ok(sum / T::from_f64_lossy(samples.len() as f64))
    }

    /// Write as CSV: a `q_dim,size` header line, the dimensions, then `Q`
    /// rows of `N` comma-separated values (one codeword per column).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "q_dim,size")?;
        writeln!(out, "{},{}", self.block_dim, self.size)?;
        for r in 0..self.block_dim {
            let row: Vec<String> = (0..self.size)
                .map(|c| format!("{:?}", self.codeword(c)[r].to_f64_lossy()))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Parse the CSV format produced by [`Self::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty codebook file".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        if header.trim() != "q_dim,size" {
            return Err(Error::Parse(format!("bad codebook header: {header}")));
        }
        let dims = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let mut it = dims.trim().split(',');
        let q: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad q_dim".into()))?;
        let n: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse("bad size".into()))?;
        let mut data = vec![T::zero(); q * n];
        for r in 0..q {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated codebook".into()))?
                .map_err(|e| Error::Parse(e.to_string()))?;
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != n {
                return Err(Error::Parse(format!(
                    "row {r} has {} values, expected {n}",
                    vals.len()
                )));
            }
            for (c, v) in vals.iter().enumerate() {
                let x: f64 = v
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value {v:?}")))?;
                data[c * q + r] = T::from_f64_lossy(x);
            }
        }
        Ok(Self {
            block_dim: q,
            size: n,
            data,
        })
    }
}

#[inline]
fn dist_sq<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn book1(values: &[f64]) -> QuantCodebook<f64> {
        let cols: Vec<&[f64]> = values.chunks(1).collect();
        QuantCodebook::from_codewords(1, &cols).unwrap()
    }

    #[test]
    fn learn_two_separated_clusters() {
        let samples = [0.0, 0.0, 0.0, 10.0, 10.0, 10.0];
        let book = QuantCodebook::learn(&samples, 1, 2, 50, 1).unwrap();
        let mut c: Vec<f64> = (0..2).map(|i| book.codeword(i)[0]).collect();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(c, vec![0.0, 10.0]);
    }

    #[test]
    fn learn_single_cluster_mean() {
        let samples = [5.0; 7];
        let book = QuantCodebook::learn(&samples, 1, 1, 50, 3).unwrap();
        assert_eq!(book.codeword(0), &[5.0]);
    }

    #[test]
    fn learn_errors() {
        assert_eq!(
            QuantCodebook::<f64>::learn(&[], 1, 2, 50, 0),
            Err(Error::NoTrainingData)
        );
        assert!(matches!(
            QuantCodebook::learn(&[1.0, f64::NAN], 1, 1, 50, 0),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            QuantCodebook::learn(&[1.0, 2.0], 1, 3, 50, 0),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn learn_is_deterministic_under_seed() {
        let mut rng = crate::seed::rng_for(99, "test-data", 0);
        let samples: Vec<f64> = (0..200).map(|_| rng.random::<f64>() * 4.0).collect();
        let a = QuantCodebook::learn(&samples, 2, 8, 50, 42).unwrap();
        let b = QuantCodebook::learn(&samples, 2, 8, 50, 42).unwrap();
        assert_eq!(a, b);
    }

    /// Within-cluster SSE of the k-means++ result should be no worse than a
    /// brute-force multi-restart Lloyd oracle (plus 5% slack).
    #[test]
    fn learn_beats_random_restart_oracle() {
        // 256 draws from a 2-D Gaussian mixture with 4 components.
        let mut rng = crate::seed::rng_for(7, "mixture", 0);
        let centers = [(0.0, 0.0), (6.0, 0.0), (0.0, 6.0), (6.0, 6.0)];
        let mut samples = Vec::with_capacity(512);
        for i in 0..256 {
            let (cx, cy) = centers[i % 4];
            samples.push(cx + gauss(&mut rng));
            samples.push(cy + gauss(&mut rng));
        }

        let book = QuantCodebook::learn(&samples, 2, 4, 50, 11).unwrap();
        let sse = sse_of(&book, &samples);

        // Oracle: 100 random-restart Lloyd runs, keep the best SSE.
        let mut best = f64::INFINITY;
        for restart in 0..100 {
            let oracle = lloyd_random_restart(&samples, 2, 4, restart);
            best = best.min(sse_of(&oracle, &samples));
        }
        assert!(
            sse <= best * 1.05,
            "k-means++ SSE {sse} worse than oracle {best}"
        );
    }

    fn gauss(rng: &mut impl Rng) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        StandardNormal.sample(rng)
    }

    fn sse_of(book: &QuantCodebook<f64>, samples: &[f64]) -> f64 {
        samples
            .chunks(book.block_dim())
            .map(|s| {
                let i = book.quantize_block(s).unwrap();
                dist_sq(s, book.codeword(i))
            })
            .sum()
    }

    /// Plain Lloyd with uniform-random initial centroids; the independent
    /// oracle for `learn_beats_random_restart_oracle`.
    fn lloyd_random_restart(samples: &[f64], q: usize, k: usize, seed: u64) -> QuantCodebook<f64> {
        let n = samples.len() / q;
        let mut rng = crate::seed::rng_for(seed, "lloyd-oracle", 0);
        let mut centroids: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let i = rng.random_range(0..n);
                samples[i * q..(i + 1) * q].to_vec()
            })
            .collect();
        for _ in 0..100 {
            let mut sums = vec![vec![0.0; q]; k];
            let mut counts = vec![0usize; k];
            for s in samples.chunks(q) {
                let (mut bi, mut bd) = (0, f64::INFINITY);
                for (i, c) in centroids.iter().enumerate() {
                    let d = dist_sq(s, c);
                    if d < bd {
                        bd = d;
                        bi = i;
                    }
                }
                counts[bi] += 1;
                for (acc, &x) in sums[bi].iter_mut().zip(s) {
                    *acc += x;
                }
            }
            for i in 0..k {
                if counts[i] > 0 {
                    for (c, s) in centroids[i].iter_mut().zip(&sums[i]) {
                        *c = s / counts[i] as f64;
                    }
                }
            }
        }
        let cols: Vec<&[f64]> = centroids.iter().map(|c| c.as_slice()).collect();
        QuantCodebook::from_codewords(q, &cols).unwrap()
    }

    #[test]
    fn quantize_block_examples() {
        let book = book1(&[-1.0, 0.0, 1.0]);
        assert_eq!(book.quantize_block(&[0.4]).unwrap(), 1);
        // Exact tie between 0.0 and 1.0: lowest index wins.
        assert_eq!(book.quantize_block(&[0.5]).unwrap(), 1);

        let book2 =
            QuantCodebook::from_codewords(2, &[&[0.0, 0.0][..], &[1.0, 1.0][..]]).unwrap();
        assert_eq!(book2.quantize_block(&[0.9, 0.8]).unwrap(), 1);
        assert!(matches!(
            book2.quantize_block(&[0.9]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn quantize_is_identity_on_codewords() {
        let book =
            QuantCodebook::from_codewords(2, &[&[0.0, 1.0][..], &[2.0, -1.0][..], &[5.0, 5.0][..]])
                .unwrap();
        for i in 0..book.size() {
            assert_eq!(book.quantize_block(book.codeword(i)).unwrap(), i);
        }
    }

    #[test]
    fn encode_pads_to_block_multiple() {
        let book = QuantCodebook::from_codewords(2, &[&[0.0, 0.0][..], &[1.0, 1.0][..]]).unwrap();
        let (iv, q) = book.encode(&[1.0, 1.0, 0.1, 0.0, 0.9]).unwrap();
        assert_eq!(iv.indices.len(), 3);
        assert_eq!(iv.padded_zeros, 1);
        assert_eq!(q.len(), 5);
    }

    #[test]
    fn encode_exact_codewords_is_lossless() {
        let u0 = [0.5, -0.5];
        let u1 = [2.0, 3.0];
        let book = QuantCodebook::from_codewords(2, &[&u0[..], &u1[..]]).unwrap();
        let s = [2.0, 3.0, 0.5, -0.5]; // (u1, u0)
        let (iv, q) = book.encode(&s).unwrap();
        assert_eq!(iv.indices, vec![1, 0]);
        assert_eq!(q, s.to_vec());
    }

    /// Scalar grid oracle: with a uniform 64-level scalar codebook spanning
    /// the sample range, per-entry error is at most half the centroid gap.
    #[test]
    fn encode_error_bounded_by_grid_spacing() {
        let mut rng = crate::seed::rng_for(5, "grid", 0);
        let s: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let n = 64usize;
        let gap = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + gap * i as f64).collect();
        let book = book1(&grid);
        let (_, q) = book.encode(&s).unwrap();
        for (&x, &qx) in s.iter().zip(&q) {
            assert!((x - qx).abs() <= gap / 2.0 + 1e-12);
        }
    }

    #[test]
    fn reconstruct_examples() {
        let u0 = [0.0, 0.0];
        let u1 = [1.0, 1.0];
        let book = QuantCodebook::from_codewords(2, &[&u0[..], &u1[..]]).unwrap();
        let iv = IndexVector {
            indices: vec![1, 0],
            padded_zeros: 0,
        };
        assert_eq!(book.reconstruct(&iv, 4).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);

        let zeros = IndexVector {
            indices: vec![0, 0, 0],
            padded_zeros: 0,
        };
        assert_eq!(book.reconstruct(&zeros, 6).unwrap(), vec![0.0; 6]);

        let bad = IndexVector {
            indices: vec![7],
            padded_zeros: 0,
        };
        assert!(matches!(
            book.reconstruct(&bad, 2),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn encode_reconstruct_roundtrip() {
        let mut rng = crate::seed::rng_for(21, "roundtrip", 0);
        let samples: Vec<f64> = (0..120).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let book = QuantCodebook::learn(&samples, 3, 8, 50, 2).unwrap();
        for trial in 0..100 {
            let w = 1 + (trial % 17);
            let s: Vec<f64> = (0..w).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let (iv, q) = book.encode(&s).unwrap();
            assert_eq!(book.reconstruct(&iv, w).unwrap(), q);
        }
    }

    #[test]
    fn accumulate_error_arithmetic() {
        let mut e = ErrorState::zeros(1);
        e.accumulate(&[0.4], &[0.0]).unwrap();
        e.accumulate(&[0.1], &[0.0]).unwrap();
        assert_eq!(e.residual(), &[0.5]);

        // Perfect quantizer: e' = 0.
        let mut e2 = ErrorState::zeros(2);
        e2.accumulate(&[0.3, -0.2], &[0.3, -0.2]).unwrap();
        assert_eq!(e2.residual(), &[0.0, 0.0]);

        // e = 0, quantized = 0 keeps delta.
        let mut e3 = ErrorState::zeros(2);
        e3.accumulate(&[1.5, 2.5], &[0.0, 0.0]).unwrap();
        assert_eq!(e3.residual(), &[1.5, 2.5]);

        assert!(e3.accumulate(&[1.0], &[0.0, 0.0]).is_err());
    }

    /// Telescoping identity: sum of transmitted quantized vectors equals the
    /// sum of raw deltas plus the initial-minus-final residual.
    #[test]
    fn error_feedback_telescopes() {
        let mut rng = crate::seed::rng_for(8, "telescope", 0);
        let samples: Vec<f64> = (0..64).map(|_| rng.random::<f64>()).collect();
        let book = QuantCodebook::learn(&samples, 2, 4, 50, 1).unwrap();
        let w = 10usize;
        let rounds = 50usize;
        let mut e = ErrorState::zeros(w);
        let mut sum_delta = vec![0.0f64; w];
        let mut sum_quant = vec![0.0f64; w];
        for _ in 0..rounds {
            let delta: Vec<f64> = (0..w).map(|_| rng.random::<f64>() - 0.5).collect();
            let s_bar = e.compensate(&delta).unwrap();
            let (_, q) = book.encode(&s_bar).unwrap();
            e.accumulate(&delta, &q).unwrap();
            for i in 0..w {
                sum_delta[i] += delta[i];
                sum_quant[i] += q[i];
            }
        }
        for i in 0..w {
            let expect = sum_delta[i] - e.residual()[i];
            assert!(
                (sum_quant[i] - expect).abs() <= 1e-9 * rounds as f64,
                "telescoping broke at {i}"
            );
        }
    }

    /// More bits never increases mean quantization error on the corpus the
    /// codebook was trained on.
    #[test]
    fn more_bits_never_hurts_on_training_corpus() {
        let mut rng = crate::seed::rng_for(17, "monotone", 0);
        let samples: Vec<f64> = (0..400).map(|_| rng.random::<f64>() * 3.0).collect();
        let mut prev = f64::INFINITY;
        for j in 1..=5 {
            let book = QuantCodebook::learn(&samples, 1, 1 << j, 50, 9).unwrap();
            let err = book.mean_sq_error(&samples).unwrap();
            assert!(
                err <= prev + 1e-12,
                "error went up at J={j}: {err} > {prev}"
            );
            prev = err;
        }
    }

    #[test]
    fn csv_roundtrip() {
        let book =
            QuantCodebook::from_codewords(2, &[&[0.25, -1.5][..], &[3.0, 0.125][..]]).unwrap();
        let mut buf = Vec::new();
        book.write_csv(&mut buf).unwrap();
        let parsed = QuantCodebook::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(parsed, book);

        assert!(QuantCodebook::<f64>::read_csv(&b"nonsense\n"[..]).is_err());
    }
}
