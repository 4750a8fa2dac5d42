//! Compressed-row copies of the dense operators for the inner loops of the
//! trajectory and master-equation integrators.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::{Operator, ZERO};

#[derive(Clone, Debug)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    /// Drops exact zeros of `op`.
    pub fn from_dense(op: &Operator) -> Self {
        let dim = op.dim();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in op.entries().rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    /// `out = A x`.
    #[inline]
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `out += alpha A x`.
    #[inline]
    pub fn apply_add(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += alpha * acc;
        }
    }

    /// `⟨x|A|x⟩` without allocating.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut total = ZERO;
        for (i, xi) in x.iter().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            total += xi.conj() * acc;
        }
        total
    }

    /// `out += A M` for a dense square `M`.
    pub fn left_mul_add(&self, m: &Array2<C64>, out: &mut Array2<C64>) {
        let n = m.ncols();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.vals[k];
                let src = m.row(self.cols[k]);
                let mut dst = out.row_mut(i);
                for c in 0..n {
                    dst[c] += v * src[c];
                }
            }
        }
    }

    pub fn to_dense(&self) -> Operator {
        let mut entries = Array2::zeros((self.dim, self.dim));
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                entries[[i, self.cols[k]]] = self.vals[k];
            }
        }
        Operator::from_entries(entries).expect("finite by construction")
    }
}
