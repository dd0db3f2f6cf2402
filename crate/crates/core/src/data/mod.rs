//! Dataset ingestion: LIBSVM text, IDX binaries, train/test splitting.

mod idx;
mod libsvm;
mod split;

pub use idx::{read_idx, read_idx_file, IdxData, ImageSet};
pub use libsvm::{parse_libsvm, read_libsvm_file, write_libsvm};
pub use split::{split, SplitSpec};

/// Labeled sparse rows stored in compressed-row form.
///
/// Feature indices are 0-based and strictly increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    dim: usize,
    row_ptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    labels: Vec<i32>,
}

impl SparseDataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0], indices: Vec::new(), values: Vec::new(), labels: Vec::new() }
    }

    /// Appends a row. Panics if indices are not strictly increasing or exceed `dim`;
    /// parsers validate before calling this.
    pub fn push_row(&mut self, label: i32, row: &[(usize, f64)]) {
        assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "row indices must be strictly increasing");
        assert!(row.last().is_none_or(|&(j, _)| j < self.dim), "feature index exceeds dimension");
        for &(j, v) in row {
            self.indices.push(j);
            self.values.push(v);
        }
        self.row_ptr.push(self.indices.len());
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Widens the feature dimension; rows are untouched.
    pub fn with_dim(mut self, dim: usize) -> Self {
        assert!(dim >= self.max_index_plus_one());
        self.dim = dim;
        self
    }

    pub fn max_index_plus_one(&self) -> usize {
        self.indices.iter().max().map_or(0, |m| m + 1)
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn label(&self, i: usize) -> i32 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Sparse dot product, accumulated in stored index order.
    pub fn dot(&self, i: usize, x: &[f64]) -> f64 {
        let (ix, v) = self.row(i);
        ix.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
    }

    pub fn row_norm_squared(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|a| a * a).sum()
    }

    /// New dataset holding the given rows in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut out = SparseDataset::new(self.dim);
        let mut buf = Vec::new();
        for &i in rows {
            let (ix, v) = self.row(i);
            buf.clear();
            buf.extend(ix.iter().copied().zip(v.iter().copied()));
            out.push_row(self.labels[i], &buf);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_read_back() {
        let mut ds = SparseDataset::new(4);
        ds.push_row(1, &[(0, 0.5), (2, -1.0)]);
        ds.push_row(-1, &[]);
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.row(0), (&[0usize, 2][..], &[0.5, -1.0][..]));
        assert_eq!(ds.row(1).0.len(), 0);
        assert_eq!(ds.dot(0, &[2.0, 9.0, 1.0, 0.0]), 0.0);
        assert_eq!(ds.max_index_plus_one(), 3);
        let sub = ds.subset(&[1, 0]);
        assert_eq!(sub.labels(), &[-1, 1]);
    }

    #[test]
    #[should_panic]
    fn rejects_unsorted_rows() {
        SparseDataset::new(4).push_row(1, &[(2, 1.0), (1, 1.0)]);
    }
}
