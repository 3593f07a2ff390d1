//! Compressed sparse row storage and the dense-panel products the truncated
//! SVD needs.

use crate::error::{DsmError, Result};

/// CSR matrix with `f64` values. Column indices are strictly increasing
/// within each row and explicit zeros are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from `(row, col, value)` triplets in any order. Duplicates are
    /// summed and zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        mut triplets: Vec<(u32, u32, f64)>,
    ) -> Result<Self> {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        let mut rows_of_entries: Vec<u32> = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(DsmError::Format(format!(
                    "entry ({r}, {c}) outside a {n_rows}×{n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(DsmError::Format(format!("non-finite value at ({r}, {c})")));
            }
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                rows_of_entries.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(col_idx.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows_of_entries.into_iter().zip(col_idx).zip(values) {
            if v != 0.0 {
                row_ptr[r as usize + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx: keep_cols,
            values: keep_vals,
        })
    }

    /// Dense row-major input; zeros are skipped.
    pub fn from_dense(n_rows: usize, n_cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(DsmError::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        let mut trip = Vec::new();
        for r in 0..n_rows {
            for c in 0..n_cols {
                let v = data[r * n_cols + c];
                if v != 0.0 {
                    trip.push((r as u32, c as u32, v));
                }
            }
        }
        Self::from_triplets(n_rows, n_cols, trip)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[u32], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&(c as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Entries in (row, col) order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n_cols];
        for (c, v) in self.col_idx.iter().zip(&self.values) {
            sums[*c as usize] += v;
        }
        sums
    }

    /// Same sparsity pattern, values replaced by `f(row, col, value)`; zeros
    /// returned by `f` are dropped.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> CsrMatrix {
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let w = f(r, c as usize, v);
                if w != 0.0 {
                    col_idx.push(c);
                    values.push(w);
                }
            }
            row_ptr[r + 1] = col_idx.len();
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Keeps the listed columns (in the given order) and renumbers them.
    pub fn select_columns(&self, keep: &[usize]) -> CsrMatrix {
        let mut remap = vec![u32::MAX; self.n_cols];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new as u32;
        }
        let mut trip = Vec::new();
        for (r, c, v) in self.iter() {
            if remap[c] != u32::MAX {
                trip.push((r as u32, remap[c], v));
            }
        }
        CsrMatrix::from_triplets(self.n_rows, keep.len(), trip)
            .expect("column selection preserves bounds")
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_idx {
            counts[c as usize + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0u32; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c as usize];
                col_idx[slot] = r as u32;
                values[slot] = v;
                next[c as usize] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows * self.n_cols];
        for (r, c, v) in self.iter() {
            out[r * self.n_cols + c] = v;
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self · x` for a row-major dense panel `x` of shape `n_cols × width`.
    pub fn mul_panel(&self, x: &[f64], width: usize) -> Vec<f64> {
        use rayon::prelude::*;
        debug_assert_eq!(x.len(), self.n_cols * width);
        let mut out = vec![0.0; self.n_rows * width];
        out.par_chunks_mut(width.max(1))
            .enumerate()
            .for_each(|(r, out_row)| {
                let (cols, vals) = self.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    let src = &x[c as usize * width..(c as usize + 1) * width];
                    for (o, s) in out_row.iter_mut().zip(src) {
                        *o += v * s;
                    }
                }
            });
        out
    }
}
