//! Minimal sparse building blocks for the simplex engine: a column-major
//! matrix with a row-major shadow for pivot-row gathers, and a scatter
//! workspace for sparse triangular solves.

/// Immutable sparse matrix stored in both column-major and row-major form.
#[derive(Debug, Clone, Default)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    // CSC
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    // CSR shadow
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub row_values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-column entry lists (row, value). Entries within a
    /// column must have distinct rows.
    pub fn from_columns(nrows: usize, cols: &[Vec<(usize, f64)>]) -> Self {
        let ncols = cols.len();
        let nnz: usize = cols.iter().map(Vec::len).sum();
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        col_ptr.push(0);
        for col in cols {
            for &(r, v) in col {
                debug_assert!(r < nrows);
                row_idx.push(r);
                values.push(v);
            }
            col_ptr.push(row_idx.len());
        }
        // transpose pass for the CSR shadow
        let mut row_counts = vec![0usize; nrows];
        for &r in &row_idx {
            row_counts[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        row_ptr.push(0);
        for r in 0..nrows {
            let last = *row_ptr.last().unwrap();
            row_ptr.push(last + row_counts[r]);
        }
        let mut next = row_ptr[..nrows].to_vec();
        let mut col_idx = vec![0usize; nnz];
        let mut row_values = vec![0.0; nnz];
        for j in 0..ncols {
            for p in col_ptr[j]..col_ptr[j + 1] {
                let r = row_idx[p];
                col_idx[next[r]] = j;
                row_values[next[r]] = values[p];
                next[r] += 1;
            }
        }
        SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
            row_ptr,
            col_idx,
            row_values,
        }
    }

    #[inline]
    pub fn col(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_idx[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&r, &v)| (r, v))
    }

    #[inline]
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi]
            .iter()
            .zip(&self.row_values[lo..hi])
            .map(|(&j, &v)| (j, v))
    }
}

/// Dense-value / sparse-pattern workspace vector. Clearing walks only the
/// touched positions, so repeated sparse solves stay cheap.
#[derive(Debug, Clone)]
pub struct ScatterVec {
    pub values: Vec<f64>,
    pub pattern: Vec<usize>,
    marked: Vec<bool>,
}

impl ScatterVec {
    pub fn new(len: usize) -> Self {
        ScatterVec {
            values: vec![0.0; len],
            pattern: Vec::new(),
            marked: vec![false; len],
        }
    }

    pub fn clear(&mut self) {
        for &i in &self.pattern {
            self.values[i] = 0.0;
            self.marked[i] = false;
        }
        self.pattern.clear();
    }

    #[inline]
    pub fn add(&mut self, i: usize, v: f64) {
        if !self.marked[i] {
            self.marked[i] = true;
            self.pattern.push(i);
        }
        self.values[i] += v;
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: f64) {
        if !self.marked[i] {
            self.marked[i] = true;
            self.pattern.push(i);
        }
        self.values[i] = v;
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn iter_nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.pattern
            .iter()
            .map(move |&i| (i, self.values[i]))
            .filter(|&(_, v)| v != 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csc_csr_agree() {
        let cols = vec![
            vec![(0, 1.0), (2, 3.0)],
            vec![(1, 2.0)],
            vec![(0, -1.0), (1, 4.0), (2, 5.0)],
        ];
        let m = SparseMatrix::from_columns(3, &cols);
        let row1: Vec<_> = m.row(1).collect();
        assert_eq!(row1, vec![(1, 2.0), (2, 4.0)]);
        let col2: Vec<_> = m.col(2).collect();
        assert_eq!(col2, vec![(0, -1.0), (1, 4.0), (2, 5.0)]);
    }

    #[test]
    fn scatter_clear_resets_only_touched() {
        let mut w = ScatterVec::new(4);
        w.add(2, 1.5);
        w.add(2, 0.5);
        w.set(0, -1.0);
        assert_eq!(w.get(2), 2.0);
        assert_eq!(w.pattern.len(), 2);
        w.clear();
        assert_eq!(w.get(2), 0.0);
        assert!(w.pattern.is_empty());
    }
}
