//! Compressed sparse row storage with a pattern shared between matrices.
//!
//! All operators of one scheme live on the node adjacency graph of the
//! mesh, so they share a single [`SparsePattern`] and differ only in their
//! value arrays. Row-wise policy matrices are then assembled by copying
//! row slices.

use std::sync::Arc;

use crate::mesh::Mesh;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    diag: Vec<usize>,
}

impl SparsePattern {
    /// Builds a square pattern from sorted, deduplicated column lists that
    /// each contain the diagonal.
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut r) in rows.into_iter().enumerate() {
            r.push(i);
            r.sort_unstable();
            r.dedup();
            assert!(r.iter().all(|&c| c < n), "column index out of range");
            diag.push(cols.len() + r.binary_search(&i).expect("diagonal present"));
            cols.extend(r);
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, diag }
    }

    /// Dense `n x n` pattern.
    pub fn dense(n: usize) -> Self {
        Self::from_rows((0..n).map(|_| (0..n).collect()).collect())
    }

    /// Node adjacency of a P1 mesh (two nodes are coupled iff they share an
    /// element).
    pub fn from_mesh(mesh: &Mesh) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_vertices()];
        for tri in mesh.triangles() {
            for &a in tri {
                rows[a].extend_from_slice(tri);
            }
        }
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.cols
    }

    pub fn row_range(&self, row: usize) -> std::ops::Range<usize> {
        self.row_ptr[row]..self.row_ptr[row + 1]
    }

    pub fn row_cols(&self, row: usize) -> &[usize] {
        &self.cols[self.row_range(row)]
    }

    /// Position of the diagonal entry of `row` in the value array.
    pub fn diag_pos(&self, row: usize) -> usize {
        self.diag[row]
    }

    /// Position of entry `(row, col)`, if it is structurally present.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let r = self.row_range(row);
        self.cols[r.clone()].binary_search(&col).ok().map(|p| r.start + p)
    }

    /// `sum_j values[row, j] * x[j]`.
    #[inline]
    pub fn row_dot(&self, values: &[f64], row: usize, x: &[f64]) -> f64 {
        let r = self.row_range(row);
        self.cols[r.clone()]
            .iter()
            .zip(&values[r])
            .map(|(&c, &v)| v * x[c])
            .sum()
    }

    pub fn mat_vec(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_dot(values, i, x)).collect()
    }
}

/// A matrix on a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |p| self.values[p])
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        self.pattern.mat_vec(&self.values, x)
    }

    pub fn row_sum(&self, row: usize) -> f64 {
        self.values[self.pattern.row_range(row)].iter().sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![vec![0.0; n]; n];
        for (i, row) in out.iter_mut().enumerate() {
            for p in self.pattern.row_range(i) {
                row[self.pattern.col_indices()[p]] = self.values[p];
            }
        }
        out
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_triangle_mesh;

    #[test]
    fn mesh_pattern_is_symmetric_with_diagonal() {
        let m = generate_triangle_mesh(2);
        let p = SparsePattern::from_mesh(&m);
        assert_eq!(p.dim(), 15);
        for i in 0..p.dim() {
            assert_eq!(p.col_indices()[p.diag_pos(i)], i);
            for &j in p.row_cols(i) {
                assert!(p.position(j, i).is_some());
            }
        }
        // interior node of a regular lattice has six neighbours
        assert_eq!(p.row_cols(0).len(), 7);
    }

    #[test]
    fn dense_mat_vec() {
        let p = Arc::new(SparsePattern::dense(2));
        let a = CsrMatrix {
            pattern: p,
            values: vec![1.0, 2.0, 3.0, 4.0],
        };
        assert_eq!(a.mat_vec(&[1.0, 1.0]), vec![3.0, 7.0]);
        assert_eq!(a.get(1, 0), 3.0);
        assert_eq!(a.to_dense(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }
}
