//! Elliptic projection onto the P1 space.
//!
//! `P w` interpolates `w` at boundary nodes and satisfies the Galerkin
//! identity `<∇P w, ∇φ_ℓ> = <∇w, ∇φ_ℓ>` for every interior hat `φ_ℓ`.

use std::sync::Arc;

use crate::error::ProjectionError;
use crate::linalg::SparseCholesky;
use crate::mesh::{dot, Mesh, Point};
use crate::sparse::SparsePattern;

/// Factorized interior stiffness system of one mesh.
#[derive(Debug)]
pub struct ProjectionOperator {
    n_vertices: usize,
    n_interior: usize,
    solver: Option<SparseCholesky>,
}

/// Relative residual accepted from the interior solve.
const SOLVE_TOLERANCE: f64 = 1e-13;

impl ProjectionOperator {
    pub fn new(mesh: &Mesh) -> Result<Self, ProjectionError> {
        let ni = mesh.n_interior();
        if ni == 0 {
            return Ok(Self {
                n_vertices: mesh.n_vertices(),
                n_interior: 0,
                solver: None,
            });
        }
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); ni];
        for tri in mesh.triangles() {
            for &a in tri.iter().filter(|&&a| a < ni) {
                rows[a].extend(tri.iter().filter(|&&b| b < ni));
            }
        }
        let pattern = Arc::new(SparsePattern::from_rows(rows));
        let mut values = vec![0.0; pattern.nnz()];
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.hat_gradients(k);
            for a in 0..3 {
                for b in 0..3 {
                    if tri[a] < ni && tri[b] < ni {
                        let pos = pattern.position(tri[a], tri[b]).expect("interior coupling");
                        values[pos] += dot(g[a], g[b]) * mesh.area(k);
                    }
                }
            }
        }
        let solver = SparseCholesky::new(pattern, values).map_err(|e| ProjectionError::Singular(e.to_string()))?;
        Ok(Self {
            n_vertices: mesh.n_vertices(),
            n_interior: ni,
            solver: Some(solver),
        })
    }

    fn check(&self, mesh: &Mesh) -> Result<(), ProjectionError> {
        if mesh.n_vertices() == self.n_vertices && mesh.n_interior() == self.n_interior {
            Ok(())
        } else {
            Err(ProjectionError::MeshMismatch {
                expected: self.n_vertices,
                got: mesh.n_vertices(),
            })
        }
    }

    /// Projection of `w` with gradient `grad`.
    pub fn project(
        &self,
        mesh: &Mesh,
        w: impl Fn(Point) -> f64,
        grad: impl Fn(Point) -> Point,
    ) -> Result<Vec<f64>, ProjectionError> {
        let boundary: Vec<f64> = (self.n_interior..self.n_vertices).map(|v| w(mesh.vertex(v))).collect();
        self.project_with_boundary(mesh, grad, &boundary)
    }

    /// Interior values from the Galerkin identity for `grad`, given the
    /// boundary values in boundary node order.
    pub fn project_with_boundary(
        &self,
        mesh: &Mesh,
        grad: impl Fn(Point) -> Point,
        boundary: &[f64],
    ) -> Result<Vec<f64>, ProjectionError> {
        self.solve(mesh, boundary, |k| mesh.edge_midpoints(k).map(&grad))
    }

    /// Projection of the P1 function with nodal values `coefficients`.
    pub fn project_discrete(&self, mesh: &Mesh, coefficients: &[f64]) -> Result<Vec<f64>, ProjectionError> {
        self.check(mesh)?;
        if coefficients.len() != self.n_vertices {
            return Err(ProjectionError::MeshMismatch {
                expected: self.n_vertices,
                got: coefficients.len(),
            });
        }
        self.solve(mesh, &coefficients[self.n_interior..], |k| [mesh.gradient_in(k, coefficients); 3])
    }

    /// `element_gradients(k)` gives the gradient at the three edge midpoints
    /// of element `k`.
    fn solve(
        &self,
        mesh: &Mesh,
        boundary: &[f64],
        element_gradients: impl Fn(usize) -> [Point; 3],
    ) -> Result<Vec<f64>, ProjectionError> {
        self.check(mesh)?;
        let ni = self.n_interior;
        let mut out = vec![0.0; self.n_vertices];
        out[ni..].copy_from_slice(boundary);
        let Some(solver) = &self.solver else {
            return Ok(out);
        };
        let mut rhs = vec![0.0; ni];
        for (k, tri) in mesh.triangles().iter().enumerate() {
            if tri.iter().all(|&v| v >= ni) {
                continue;
            }
            let g = mesh.hat_gradients(k);
            let area = mesh.area(k);
            let gw = element_gradients(k);
            for a in 0..3 {
                let row = tri[a];
                if row >= ni {
                    continue;
                }
                rhs[row] += area / 3.0 * gw.iter().map(|q| dot(*q, g[a])).sum::<f64>();
                for b in 0..3 {
                    if tri[b] >= ni {
                        rhs[row] -= dot(g[a], g[b]) * area * out[tri[b]];
                    }
                }
            }
        }
        let scale = rhs.iter().fold(1.0f64, |m, r| m.max(r.abs()));
        let interior = solver.solve(&rhs, SOLVE_TOLERANCE * scale)?;
        out[..ni].copy_from_slice(&interior);
        Ok(out)
    }
}

/// Residuals `<∇(u_h - w), ∇φ_ℓ>` on interior rows, assembled element by
/// element with the midpoint rule.
pub fn galerkin_residual(mesh: &Mesh, coefficients: &[f64], grad: impl Fn(Point) -> Point) -> Vec<f64> {
    let ni = mesh.n_interior();
    let mut r = vec![0.0; ni];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(k);
        let gu = mesh.gradient_in(k, coefficients);
        let mids = mesh.edge_midpoints(k);
        for a in 0..3 {
            if tri[a] < ni {
                let exact: f64 = mids.iter().map(|&m| dot(grad(m), g[a])).sum::<f64>() / 3.0;
                r[tri[a]] += (dot(gu, g[a]) - exact) * mesh.area(k);
            }
        }
    }
    r
}
