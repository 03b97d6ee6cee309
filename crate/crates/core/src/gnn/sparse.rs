use ndarray::{Array2, ArrayView2};

/// Compressed sparse rows; just enough for propagation and sparse inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0; n_rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            indptr[r + 1] += 1;
            indices.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            indptr[r + 1] += indptr[r];
        }
        Self { n_rows, n_cols, indptr, indices, values }
    }

    /// Keeps the nonzero entries of a dense matrix.
    pub fn from_dense(m: ArrayView2<'_, f64>) -> Self {
        let triplets = m
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((r, c), &v)| (r, c, v))
            .collect();
        Self::from_triplets(m.nrows(), m.ncols(), triplets)
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same pattern with values multiplied entrywise by `factors` (one per stored entry).
    pub fn scaled(&self, factors: &[f64]) -> Self {
        assert_eq!(factors.len(), self.nnz());
        Self {
            values: self.values.iter().zip(factors).map(|(v, f)| v * f).collect(),
            ..self.clone()
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    /// `self · b`.
    pub fn dot(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_cols, b.nrows());
        let mut out = Array2::zeros((self.n_rows, b.ncols()));
        for (r, mut dst) in out.rows_mut().into_iter().enumerate() {
            for (c, v) in self.row(r) {
                dst.scaled_add(v, &b.row(c));
            }
        }
        out
    }

    /// `selfᵀ · b`.
    pub fn t_dot(&self, b: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.n_rows, b.nrows());
        let mut out = Array2::zeros((self.n_cols, b.ncols()));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &b.row(r));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                out[[r, c]] += v;
            }
        }
        out
    }
}
