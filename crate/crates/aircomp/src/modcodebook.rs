//! Shared non-orthogonal modulation codebook.
//!
//! An `L x N` complex matrix whose columns are the transmit sequences. The
//! column index is in one-to-one correspondence with the quantization
//! codeword index: a device that quantizes a block to codeword `n` transmits
//! column `n`. Entries are drawn i.i.d. from the QPSK alphabet
//! `{(+-1 +- j)/sqrt(2)}`, so every entry has unit modulus and every column
//! has norm `sqrt(L)`.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Shared `L x N` sequence codebook (column-major storage).
#[derive(Debug, Clone, PartialEq)]
pub struct ModCodebook<T> {
    seq_len: usize,
    size: usize,
    seed: u64,
    data: Vec<Complex<T>>,
}

impl<T: Real> ModCodebook<T> {
    /// Generate an `L x N` codebook with i.i.d. QPSK-alphabet entries,
    /// reproducible under `seed`.
    pub fn generate(seq_len: usize, size: usize, master_seed: u64) -> Result<Self> {
        if seq_len == 0 || size == 0 {
            return Err(Error::InvalidParameter {
                name: "modulation codebook shape",
                reason: format!("seq_len={seq_len}, size={size}"),
            });
        }
        let mut rng = seed::rng_for(master_seed, "modbook", 0);
        let scale = T::from_f64_lossy(std::f64::consts::FRAC_1_SQRT_2);
        let neg = -scale;
        let data = (0..seq_len * size)
            .map(|_| {
                let bits = rng.random_range(0u8..4);
                Complex::new(
                    if bits & 1 == 0 { scale } else { neg },
                    if bits & 2 == 0 { scale } else { neg },
                )
            })
            .collect();
        Ok(Self {
            seq_len,
            size,
            seed: master_seed,
            data,
        })
    }

    /// Orthogonal DFT codebook (`L x L`, unit-modulus entries). Useful as an
    /// ideal-channel reference where superposed sequences are separable
    /// exactly.
    pub fn dft(seq_len: usize) -> Result<Self> {
        if seq_len == 0 {
            return Err(Error::InvalidParameter {
                name: "seq_len",
                reason: "must be positive".into(),
            });
        }
        let step = -2.0 * std::f64::consts::PI / seq_len as f64;
        let data = (0..seq_len * seq_len)
            .map(|i| {
                let (col, row) = (i / seq_len, i % seq_len);
                let angle = step * ((row * col) % seq_len) as f64;
                Complex::new(
                    T::from_f64_lossy(angle.cos()),
                    T::from_f64_lossy(angle.sin()),
                )
            })
            .collect();
        Ok(Self {
            seq_len,
            size: seq_len,
            seed: 0,
            data,
        })
    }

    /// Build from explicit columns (test fixtures, ablations).
    pub fn from_columns(seq_len: usize, columns: &[Vec<Complex<T>>]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidParameter {
                name: "columns",
                reason: "must be nonempty".into(),
            });
        }
        let mut data = Vec::with_capacity(seq_len * columns.len());
        for col in columns {
            if col.len() != seq_len {
                return Err(Error::DimensionMismatch {
                    context: "modulation column",
                    expected: seq_len,
                    got: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        Ok(Self {
            seq_len,
            size: columns.len(),
            seed: 0,
            data,
        })
    }

    /// Sequence length `L`.
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Number of sequences `N`.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Seed the codebook was generated from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Column `n` (zero-based): the transmit sequence paired with
    /// quantization codeword `n`.
    pub fn sequence(&self, n: usize) -> Result<&[Complex<T>]> {
        if n >= self.size {
            return Err(Error::IndexOutOfRange {
                index: n,
                size: self.size,
            });
        }
        Ok(&self.data[n * self.seq_len..(n + 1) * self.seq_len])
    }

    /// Largest absolute normalized cross-correlation between distinct
    /// columns.
    pub fn coherence(&self) -> T {
        let mut max = T::zero();
        for a in 0..self.size {
            let ca = self.sequence(a).unwrap();
            let na = norm(ca);
            for b in (a + 1)..self.size {
                let cb = self.sequence(b).unwrap();
                let dot: Complex<T> = ca
                    .iter()
                    .zip(cb)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (&x, &y)| {
                        acc + x.conj() * y
                    });
                let c = dot.norm() / (na * norm(cb));
                if c > max {
                    max = c;
                }
            }
        }
        max
    }

    /// Write as CSV keyed by `(L, N, seed)`, entries as interleaved re/im.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "seq_len,size,seed")?;
        writeln!(out, "{},{},{}", self.seq_len, self.size, self.seed)?;
        for n in 0..self.size {
            let parts: Vec<String> = self.data[n * self.seq_len..(n + 1) * self.seq_len]
                .iter()
                .flat_map(|z| {
                    [
                        format!("{:?}", z.re.to_f64_lossy()),
                        format!("{:?}", z.im.to_f64_lossy()),
                    ]
                })
                .collect();
            writeln!(out, "{}", parts.join(","))?;
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
        if header.trim() != "seq_len,size,seed" {
            return Err(Error::Parse(format!("bad header: {header}")));
        }
        let dims = lines
            .next()
            .ok_or_else(|| Error::Parse("missing dimension line".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let parts: Vec<&str> = dims.trim().split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse("bad dimension line".into()));
        }
        let seq_len: usize = parts[0].parse().map_err(|_| Error::Parse("bad seq_len".into()))?;
        let size: usize = parts[1].parse().map_err(|_| Error::Parse("bad size".into()))?;
        let seed: u64 = parts[2].parse().map_err(|_| Error::Parse("bad seed".into()))?;
        let mut data = Vec::with_capacity(seq_len * size);
        for n in 0..size {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated codebook".into()))?
                .map_err(|e| Error::Parse(e.to_string()))?;
            let vals: Vec<&str> = line.trim().split(',').collect();
            if vals.len() != 2 * seq_len {
                return Err(Error::Parse(format!(
                    "column {n} has {} values, expected {}",
                    vals.len(),
                    2 * seq_len
                )));
            }
            for pair in vals.chunks(2) {
                let re: f64 = pair[0]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value {:?}", pair[0])))?;
                let im: f64 = pair[1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value {:?}", pair[1])))?;
                data.push(Complex::new(T::from_f64_lossy(re), T::from_f64_lossy(im)));
            }
        }
        Ok(Self {
            seq_len,
            size,
            seed,
            data,
        })
    }
}

fn norm<T: Real>(col: &[Complex<T>]) -> T {
    col.iter()
        .map(|z| z.norm_sqr())
        .fold(T::zero(), |a, b| a + b)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRAC: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn entries_are_qpsk_alphabet_bit_exact() {
        let book = ModCodebook::<f64>::generate(4, 8, 123).unwrap();
        for n in 0..8 {
            for z in book.sequence(n).unwrap() {
                assert!(z.re.abs() == FRAC && z.im.abs() == FRAC, "entry {z:?}");
            }
        }
    }

    #[test]
    fn column_norms_are_sqrt_l() {
        let book = ModCodebook::<f64>::generate(2, 4, 9).unwrap();
        for n in 0..4 {
            let norm_sq: f64 = book.sequence(n).unwrap().iter().map(|z| z.norm_sqr()).sum();
            assert!((norm_sq - 2.0).abs() < 1e-14, "norm^2 = {norm_sq}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = ModCodebook::<f64>::generate(16, 32, 77).unwrap();
        let b = ModCodebook::<f64>::generate(16, 32, 77).unwrap();
        assert_eq!(a, b);
        let c = ModCodebook::<f64>::generate(16, 32, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn coherence_is_bounded() {
        let book = ModCodebook::<f64>::generate(20, 64, 5).unwrap();
        let mu = book.coherence();
        assert!(mu > 0.0 && mu < 0.9, "coherence {mu}");
    }

    #[test]
    fn sequence_bounds() {
        let book = ModCodebook::<f64>::generate(3, 5, 1).unwrap();
        assert_eq!(book.sequence(0).unwrap().len(), 3);
        assert_eq!(book.sequence(4).unwrap().len(), 3);
        assert!(matches!(
            book.sequence(5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(ModCodebook::<f64>::generate(0, 4, 1).is_err());
        assert!(ModCodebook::<f64>::generate(4, 0, 1).is_err());
    }

    #[test]
    fn quantizer_index_maps_to_same_column() {
        use crate::quantizer::QuantCodebook;
        let u = QuantCodebook::from_codewords(
            1,
            &[&[-1.0][..], &[0.0][..], &[1.0][..], &[2.0][..]],
        )
        .unwrap();
        let p = ModCodebook::<f64>::generate(6, 4, 3).unwrap();
        for n in 0..4 {
            let idx = u.quantize_block(u.codeword(n)).unwrap();
            assert_eq!(idx, n);
            assert_eq!(p.sequence(idx).unwrap(), p.sequence(n).unwrap());
        }
    }

    #[test]
    fn dft_columns_are_orthogonal_unit_modulus() {
        let book = ModCodebook::<f64>::dft(8).unwrap();
        for n in 0..8 {
            for z in book.sequence(n).unwrap() {
                assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }
        for a in 0..8 {
            for b in (a + 1)..8 {
                let dot: Complex<f64> = book
                    .sequence(a)
                    .unwrap()
                    .iter()
                    .zip(book.sequence(b).unwrap())
                    .map(|(&x, &y)| x.conj() * y)
                    .sum();
                assert!(dot.norm() < 1e-9, "columns {a},{b} correlate: {dot}");
            }
        }
    }

    #[test]
    fn csv_roundtrip() {
        let book = ModCodebook::<f64>::generate(3, 4, 42).unwrap();
        let mut buf = Vec::new();
        book.write_csv(&mut buf).unwrap();
        let parsed = ModCodebook::<f64>::read_csv(&buf[..]).unwrap();
        assert_eq!(parsed, book);
        assert_eq!(parsed.seed(), 42);
    }
}
