//! Compressed sparse row storage for the symmetric cost matrices.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Work threshold (rows × columns) above which dense products are split
/// across threads, one column per task.
const PARALLEL_WORK: usize = 1 << 16;

/// Absolute tolerance of the symmetry check at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A sparse symmetric matrix. Both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricCsr {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricCsr {
    pub fn zeros(dim: usize) -> Self {
        SymmetricCsr { dim, row_ptr: vec![0; dim + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates and
    /// dropping exact zeros. Both triangles must be supplied.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= dim || j >= dim {
                return Err(Error::invalid(format!("entry ({i}, {j}) outside a {dim}x{dim} matrix")));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("entry ({i}, {j}) is not finite")));
            }
            sorted.push((i, j, v));
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(sorted.len());
        for (i, j, v) in sorted {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|t| t.2 != 0.0);

        let mut row_ptr = vec![0usize; dim + 1];
        for t in &merged {
            row_ptr[t.0 + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        let m = SymmetricCsr { dim, row_ptr, col_idx, values };
        m.check_symmetric()?;
        Ok(m)
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let vt = self.get(j, i);
                if (v - vt).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j}): {v} vs {vt}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzeros of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Row-major `(row, col, value)` listing of every stored entry.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.dim).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    fn mul_column(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let span = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = 0.0;
            for (&j, &v) in self.col_idx[span.clone()].iter().zip(&self.values[span]) {
                acc += v * x[j];
            }
            *o = acc;
        }
    }

    /// Sparse-dense product `M · R`.
    pub fn mul_dense(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(r.nrows(), self.dim, "dimension mismatch in sparse product");
        let mut out = DMatrix::zeros(self.dim, r.ncols());
        if self.dim * r.ncols() >= PARALLEL_WORK && r.ncols() > 1 {
            let cols: Vec<Vec<f64>> = (0..r.ncols())
                .into_par_iter()
                .map(|c| {
                    let mut col = vec![0.0; self.dim];
                    self.mul_column(r.column(c).as_slice(), &mut col);
                    col
                })
                .collect();
            for (c, col) in cols.into_iter().enumerate() {
                out.column_mut(c).copy_from_slice(&col);
            }
        } else {
            for c in 0..r.ncols() {
                let src = r.column(c);
                let mut dst = out.column_mut(c);
                self.mul_column(src.as_slice(), dst.as_mut_slice());
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.dim, "dimension mismatch in sparse product");
        let mut out = DVector::zeros(self.dim);
        self.mul_column(x.as_slice(), out.as_mut_slice());
        out
    }

    /// `trace(Rᵀ M R)`, the value of the factored objective.
    pub fn trace_quadratic(&self, r: &DMatrix<f64>) -> f64 {
        self.mul_dense(r).dot(r)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }
}
