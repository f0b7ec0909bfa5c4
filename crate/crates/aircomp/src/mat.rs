//! Minimal dense column-major matrix.
//!
//! The detector works on small `L x M` / `N x M` matrices; a thin wrapper
//! over `Vec` with column-major storage keeps per-column slices contiguous,
//! which is the access pattern of every inner loop in this crate.

/// Dense column-major matrix over an arbitrary element type.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<E> {
    rows: usize,
    cols: usize,
    data: Vec<E>,
}

impl<E: Copy> Mat<E> {
    /// Matrix filled with a constant.
    pub fn filled(rows: usize, cols: usize, value: E) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Build from a function of (row, col).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> E) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> E {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: E) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[col * self.rows + row] = value;
    }

    /// Contiguous slice holding one column.
    #[inline]
    pub fn col(&self, col: usize) -> &[E] {
        let start = col * self.rows;
        &self.data[start..start + self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, col: usize) -> &mut [E] {
        let start = col * self.rows;
        &mut self.data[start..start + self.rows]
    }

    /// All entries in column-major order.
    pub fn as_slice(&self) -> &[E] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [E] {
        &mut self.data
    }
}
