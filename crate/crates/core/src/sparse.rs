//! Symmetrically normalized adjacency with self-loops, stored as CSR.

use ndarray::{Array2, ArrayView2};

use crate::graph::Adjacency;

/// `D^-1/2 (A + I) D^-1/2` where `D` is the degree matrix of `A + I`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

pub fn normalized_adjacency(adjacency: &Adjacency) -> NormalizedAdjacency {
    let n = adjacency.n_nodes();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|v| 1.0 / ((adjacency.degree(v) + 1) as f64).sqrt())
        .collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(2 * adjacency.n_edges() + n);
    let mut values = Vec::with_capacity(cols.capacity());
    offsets.push(0);
    for v in 0..n {
        let mut self_done = false;
        for &u in adjacency.neighbors(v) {
            if !self_done && u > v {
                cols.push(v);
                values.push(inv_sqrt[v] * inv_sqrt[v]);
                self_done = true;
            }
            cols.push(u);
            values.push(inv_sqrt[v] * inv_sqrt[u]);
        }
        if !self_done {
            cols.push(v);
            values.push(inv_sqrt[v] * inv_sqrt[v]);
        }
        offsets.push(cols.len());
    }
    NormalizedAdjacency {
        n,
        offsets,
        cols,
        values,
    }
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[i]..self.offsets[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    /// `self * dense`.
    pub fn matmul(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(dense.nrows(), self.n, "dimension mismatch in sparse matmul");
        let mut out = Array2::zeros((self.n, dense.ncols()));
        for (i, mut out_row) in out.rows_mut().into_iter().enumerate() {
            for (j, a) in self.row(i) {
                out_row.scaled_add(a, &dense.row(j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, a) in self.row(i) {
                out[[i, j]] = a;
            }
        }
        out
    }
}
