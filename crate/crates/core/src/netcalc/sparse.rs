//! Compressed sparse row matrices holding only nonzero entries.

/// A `rows × cols` matrix in CSR form. Explicit zeros are never stored, so
/// `nnz` is the number of nonzero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = SparseMatrix::builder(n, n);
        for (i, v) in diag.iter().enumerate() {
            m.push(i, *v);
            m.finish_row();
        }
        m.build()
    }

    /// From a row-major dense slice of length `rows · cols`.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "dense data has wrong length");
        let mut m = SparseMatrix::builder(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.push(c, data[r * cols + c]);
            }
            m.finish_row();
        }
        m.build()
    }

    /// From (row, col, value) triplets; duplicates are summed in input order.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows];
        for &(r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r}, {c}) out of bounds");
            per_row[r].push((c, v));
        }
        let mut m = SparseMatrix::builder(rows, cols);
        for mut row in per_row {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut acc = 0.0;
                while k < row.len() && row[k].0 == c {
                    acc += row[k].1;
                    k += 1;
                }
                m.push(c, acc);
            }
            m.finish_row();
        }
        m.build()
    }

    pub fn builder(rows: usize, cols: usize) -> SparseBuilder {
        SparseBuilder { m: Self { rows, cols, indptr: vec![0], indices: Vec::new(), values: Vec::new() } }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the (column, value) pairs of row `r` in column order.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.rows * self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out[r * self.cols + c] = v;
            }
        }
        out
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.rows).flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v))).collect()
    }

    /// y = A x + b.
    pub fn affine_apply(&self, x: &[f64], b: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.rows) {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yr = acc + b[r];
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.affine_apply(x, &vec![0.0; self.rows], &mut y);
        y
    }

    /// The product `self · other`.
    pub fn mul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut acc = vec![0.0; other.cols];
        let mut touched = vec![false; other.cols];
        let mut cols_hit: Vec<usize> = Vec::new();
        let mut out = SparseMatrix::builder(self.rows, other.cols);
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_hit.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols_hit.sort_unstable();
            for &c in &cols_hit {
                out.push(c, acc[c]);
                acc[c] = 0.0;
                touched[c] = false;
            }
            cols_hit.clear();
            out.finish_row();
        }
        out.build()
    }

    pub fn scale_rows(&self, s: &[f64]) -> SparseMatrix {
        let mut out = SparseMatrix::builder(self.rows, self.cols);
        for (r, sr) in s.iter().enumerate().take(self.rows) {
            for (c, v) in self.row(r) {
                out.push(c, sr * v);
            }
            out.finish_row();
        }
        out.build()
    }

    pub fn block_diag(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = SparseMatrix::builder(rows, cols);
        let mut off = 0;
        for b in blocks {
            for r in 0..b.rows {
                for (c, v) in b.row(r) {
                    out.push(off + c, v);
                }
                out.finish_row();
            }
            off += b.cols;
        }
        out.build()
    }

    /// Stacks matrices with equal column counts vertically.
    pub fn vstack(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let cols = blocks.first().map_or(0, |b| b.cols);
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = SparseMatrix::builder(rows, cols);
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack needs equal column counts");
            for r in 0..b.rows {
                for (c, v) in b.row(r) {
                    out.push(c, v);
                }
                out.finish_row();
            }
        }
        out.build()
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(blocks: &[&SparseMatrix]) -> SparseMatrix {
        let rows = blocks.first().map_or(0, |b| b.rows);
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut out = SparseMatrix::builder(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for b in blocks {
                assert_eq!(b.rows, rows, "hstack needs equal row counts");
                for (c, v) in b.row(r) {
                    out.push(off + c, v);
                }
                off += b.cols;
            }
            out.finish_row();
        }
        out.build()
    }
}

/// Row-by-row CSR construction. Zero values are dropped.
pub struct SparseBuilder {
    m: SparseMatrix,
}

impl SparseBuilder {
    /// Appends an entry to the current row; columns must increase.
    pub fn push(&mut self, col: usize, value: f64) {
        debug_assert!(col < self.m.cols);
        if value != 0.0 {
            self.m.indices.push(col);
            self.m.values.push(value);
        }
    }

    pub fn finish_row(&mut self) {
        self.m.indptr.push(self.m.values.len());
    }

    pub fn build(self) -> SparseMatrix {
        assert_eq!(self.m.indptr.len(), self.m.rows + 1, "builder rows incomplete");
        self.m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_dense() {
        let a = SparseMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, -1.0, 3.0]);
        let b = SparseMatrix::from_dense(3, 2, &[0.0, 1.0, 4.0, 0.0, 1.0, 1.0]);
        let c = a.mul(&b);
        assert_eq!(c.to_dense(), vec![2.0, 3.0, -1.0, 3.0]);
    }

    #[test]
    fn cancellation_drops_entries() {
        let a = SparseMatrix::from_dense(1, 2, &[1.0, -1.0]);
        let b = SparseMatrix::from_dense(2, 1, &[1.0, 1.0]);
        assert_eq!(a.mul(&b).nnz(), 0);
    }

    #[test]
    fn stacking() {
        let i = SparseMatrix::identity(2);
        let z = SparseMatrix::from_dense(1, 2, &[5.0, 0.0]);
        assert_eq!(SparseMatrix::vstack(&[&i, &z]).to_dense(), vec![1.0, 0.0, 0.0, 1.0, 5.0, 0.0]);
        assert_eq!(SparseMatrix::block_diag(&[&z, &z]).to_dense(), vec![5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0]);
        assert_eq!(SparseMatrix::hstack(&[&i, &i]).nnz(), 4);
    }
}
