//! Reconstruction and overhead metrics.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Normalized mean squared error in dB between true and estimated count
/// vectors, summed over blocks:
/// `10 log10(sum_d ||x_d - xhat_d||^2 / sum_d ||x_d||^2)`.
/// Exact recovery is floored at -300 dB; an all-zero truth is an error.
pub fn nmse_db<T: Real>(truth: &[Vec<T>], estimate: &[Vec<T>]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            context: "nmse blocks",
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (x, xh) in truth.iter().zip(estimate) {
        if x.len() != xh.len() {
            return Err(Error::DimensionMismatch {
                context: "nmse block entries",
                expected: x.len(),
                got: xh.len(),
            });
        }
        for (&a, &b) in x.iter().zip(xh) {
            let d = (a - b).to_f64_lossy();
            num += d * d;
            let av = a.to_f64_lossy();
            den += av * av;
        }
    }
    if den == 0.0 {
        return Err(Error::AllZeroTruth);
    }
    let ratio = num / den;
    Ok(if ratio <= 1e-30 {
        -300.0
    } else {
        (10.0 * ratio.log10()).max(-300.0)
    })
}

/// Sparsity and collision statistics of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionStats {
    /// Average fraction of used codewords: `sum_d ||x_d||_0 / (N D)`.
    pub sparsity_ratio: f64,
    /// Probability that at least two devices collided in a block.
    pub p_c1: f64,
    /// Probability that more than two devices collided in a block.
    pub p_c2: f64,
}

/// Collision statistics from the true per-block integer counts given the
/// number of active devices.
pub fn collision_stats(count_blocks: &[Vec<u32>], ka: usize) -> Result<CollisionStats> {
    if ka == 0 {
        return Err(Error::InvalidParameter {
            name: "ka",
            reason: "must be at least 1".into(),
        });
    }
    if count_blocks.is_empty() {
        return Err(Error::InvalidParameter {
            name: "count_blocks",
            reason: "must be nonempty".into(),
        });
    }
    let d = count_blocks.len() as f64;
    let n = count_blocks[0].len() as f64;
    let mut nnz_total = 0usize;
    let mut full = 0usize; // blocks with ||x||_0 == ka (no collision)
    let mut one_less = 0usize; // blocks with ||x||_0 == ka - 1
    for counts in count_blocks {
        let nnz = counts.iter().filter(|&&c| c > 0).count();
        nnz_total += nnz;
        if nnz == ka {
            full += 1;
        } else if nnz + 1 == ka {
            one_less += 1;
        }
    }
    let p_c1 = 1.0 - full as f64 / d;
    Ok(CollisionStats {
        sparsity_ratio: nnz_total as f64 / (n * d),
        p_c1,
        p_c2: p_c1 - one_less as f64 / d,
    })
}

/// Uplink time-slot counts for one training round under the compared
/// schemes, all `P`-subcarrier OFDM.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverheadTable {
    /// Orthogonal access with the same vector quantizer: `ceil(W/Q) * K / P`.
    pub vq_ofdma: u64,
    /// Frequency-shift keying majority vote: `2W / P`.
    pub fsk_mv: u64,
    /// One-bit digital aggregation: `W / P`.
    pub obda: u64,
    /// Shared-sequence aggregation: `ceil(W/Q) * L / P`.
    pub md_aircomp: u64,
}

/// Per-scheme uplink overhead, every entry rounded up to whole time slots.
pub fn overhead_table(w: u64, q: u64, l: u64, k: u64, p: u64) -> Result<OverheadTable> {
    if w == 0 || q == 0 || l == 0 || k == 0 || p == 0 {
        return Err(Error::InvalidParameter {
            name: "overhead arguments",
            reason: "all must be positive".into(),
        });
    }
    let blocks = w.div_ceil(q);
    Ok(OverheadTable {
        vq_ofdma: (blocks * k).div_ceil(p),
        fsk_mv: (2 * w).div_ceil(p),
        obda: w.div_ceil(p),
        md_aircomp: (blocks * l).div_ceil(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nmse_zero_estimate_is_zero_db() {
        let x = vec![vec![1.0, 2.0], vec![0.0, 3.0]];
        let xh = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!((nmse_db(&x, &xh).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn nmse_exact_recovery_floors() {
        let x = vec![vec![1.0, 2.0]];
        assert_eq!(nmse_db(&x, &x).unwrap(), -300.0);
    }

    #[test]
    fn nmse_one_percent_error_is_minus_twenty() {
        let x = vec![vec![10.0, 0.0]];
        let xh = vec![vec![10.0, 1.0]]; // ||d||^2/||x||^2 = 1/100
        assert!((nmse_db(&x, &xh).unwrap() + 20.0).abs() < 1e-9);
    }

    #[test]
    fn nmse_rejects_zero_truth() {
        let x = vec![vec![0.0, 0.0]];
        assert_eq!(nmse_db(&x, &x).unwrap_err(), Error::AllZeroTruth);
    }

    #[test]
    fn collision_stats_definitions() {
        // ka = 3, nnz per block [3, 3, 2] -> P_c1 = 1/3.
        let blocks = vec![vec![1, 1, 1, 0], vec![1, 2, 0, 0], vec![3, 0, 0, 0]];
        // nnz: 3, 2, 1
        let s = collision_stats(&blocks, 3).unwrap();
        assert!((s.p_c1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.p_c2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.sparsity_ratio - 6.0 / 12.0).abs() < 1e-15);

        let blocks = vec![vec![1, 1, 1, 0], vec![1, 1, 1, 0], vec![1, 1, 0, 1]];
        let s = collision_stats(&blocks, 3).unwrap();
        assert!((s.p_c1 - 0.0).abs() < 1e-15);
        assert!((s.p_c2 - 0.0).abs() < 1e-15);
        assert!((s.sparsity_ratio - 3.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn overhead_reference_values() {
        let t = overhead_table(269_722, 20, 20, 40, 1024).unwrap();
        assert_eq!(t.vq_ofdma, 527);
        assert_eq!(t.fsk_mv, 527);
        assert_eq!(t.obda, 264);
        assert_eq!(t.md_aircomp, 264);

        let t = overhead_table(269_722, 20, 15, 40, 1024).unwrap();
        assert_eq!(t.md_aircomp, 198);
    }

    #[test]
    fn overhead_degenerate_collapses_to_w_over_p() {
        let t = overhead_table(1000, 1, 1, 1, 64).unwrap();
        let per = 1000u64.div_ceil(64);
        assert_eq!(t.vq_ofdma, per);
        assert_eq!(t.obda, per);
        assert_eq!(t.md_aircomp, per);
        assert_eq!(t.fsk_mv, 2000u64.div_ceil(64));
    }
}
