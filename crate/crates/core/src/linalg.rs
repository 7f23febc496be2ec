//! Sparse direct solves on a [`SparsePattern`], backed by faer.
//!
//! A CSR matrix is the CSC storage of its transpose, so the pattern is
//! handed to faer without copying and systems are solved through the
//! transposed factorization.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Side;

use crate::error::LinearSolveError;
use crate::sparse::{max_abs, SparsePattern};

const MAX_REFINEMENT_STEPS: usize = 3;

/// LU solver that reuses one symbolic factorization for every matrix on the
/// same pattern.
#[derive(Clone)]
pub struct SparseLu {
    pattern: Arc<SparsePattern>,
    symbolic: SymbolicLu<usize>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("dim", &self.pattern.dim()).finish()
    }
}

impl SparseLu {
    pub fn new(pattern: Arc<SparsePattern>) -> Result<Self, LinearSolveError> {
        let n = pattern.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, pattern.row_ptr(), None, pattern.col_indices());
        let symbolic =
            SymbolicLu::try_new(sym).map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
        Ok(Self { pattern, symbolic })
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    /// Solves `A x = rhs` for the CSR matrix with the given values and checks
    /// `||A x - rhs||_inf <= tolerance`, refining iteratively if needed.
    pub fn solve(&self, values: &[f64], rhs: &[f64], tolerance: f64) -> Result<Vec<f64>, LinearSolveError> {
        let p = &self.pattern;
        let n = p.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, p.row_ptr(), None, p.col_indices());
        let mat = SparseColMatRef::new(sym, values);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat)
            .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
        let solve = |b: &mut [f64]| {
            lu.solve_transpose_in_place(faer::ColMut::from_slice_mut(b).as_mat_mut());
        };

        let mut x = rhs.to_vec();
        solve(&mut x);
        let mut residual = residual(p, values, &x, rhs);
        let mut steps = 0;
        while max_abs(&residual) > tolerance && steps < MAX_REFINEMENT_STEPS {
            solve(&mut residual);
            for (xi, d) in x.iter_mut().zip(&residual) {
                *xi += d;
            }
            residual = self::residual(p, values, &x, rhs);
            steps += 1;
        }
        let r = max_abs(&residual);
        if !(r <= tolerance) {
            return Err(LinearSolveError::Residual {
                residual: r,
                tolerance,
            });
        }
        Ok(x)
    }
}

fn residual(p: &SparsePattern, values: &[f64], x: &[f64], rhs: &[f64]) -> Vec<f64> {
    (0..p.dim()).map(|i| rhs[i] - p.row_dot(values, i, x)).collect()
}

/// Cholesky factorization of a symmetric positive definite CSR matrix.
pub struct SparseCholesky {
    pattern: Arc<SparsePattern>,
    values: Vec<f64>,
    factor: Llt<usize, f64>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("dim", &self.pattern.dim()).finish()
    }
}

impl SparseCholesky {
    pub fn new(pattern: Arc<SparsePattern>, values: Vec<f64>) -> Result<Self, LinearSolveError> {
        let n = pattern.dim();
        let sym = SymbolicSparseColMatRef::new_checked(n, n, pattern.row_ptr(), None, pattern.col_indices());
        let symbolic = SymbolicLlt::try_new(sym, Side::Lower)
            .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
        let factor = Llt::try_new_with_symbolic(symbolic, SparseColMatRef::new(sym, &values), Side::Lower)
            .map_err(|e| LinearSolveError::Factorization(format!("{e:?}")))?;
        Ok(Self {
            pattern,
            values,
            factor,
        })
    }

    pub fn solve(&self, rhs: &[f64], tolerance: f64) -> Result<Vec<f64>, LinearSolveError> {
        let solve = |b: &mut [f64]| {
            self.factor.solve_in_place(faer::ColMut::from_slice_mut(b).as_mat_mut());
        };
        let mut x = rhs.to_vec();
        solve(&mut x);
        let mut r = residual(&self.pattern, &self.values, &x, rhs);
        let mut steps = 0;
        while max_abs(&r) > tolerance && steps < MAX_REFINEMENT_STEPS {
            solve(&mut r);
            for (xi, d) in x.iter_mut().zip(&r) {
                *xi += d;
            }
            r = residual(&self.pattern, &self.values, &x, rhs);
            steps += 1;
        }
        let res = max_abs(&r);
        if !(res <= tolerance) {
            return Err(LinearSolveError::Residual {
                residual: res,
                tolerance,
            });
        }
        Ok(x)
    }
}
