//! Two-dimensional P1 triangulations.
//!
//! A [`Mesh`] stores its nodes in interior-first order: indices
//! `0..n_interior()` lie inside the domain and the boundary nodes follow.
//! Element geometry (areas, hat-function gradients, diameters) and the
//! `L1` norms of the hat functions are computed once at construction, so a
//! mesh is immutable and cheap to share between threads.

mod acuteness;
mod generate;
mod io;

pub use acuteness::{check_strict_acuteness, AcutenessReport, WorstPair};
pub use generate::{generate_annulus_mesh, generate_triangle_mesh};
pub use io::{load_mesh, save_mesh};

use crate::error::MeshError;

/// A point in the plane.
pub type Point = [f64; 2];

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    n_interior: usize,
    areas: Vec<f64>,
    gradients: Vec<[Point; 3]>,
    diameters: Vec<f64>,
    l1_norms: Vec<f64>,
    /// `external_ids[internal] = id in the source ordering`.
    external_ids: Vec<usize>,
    /// CSR-style node to (element, local vertex) incidence.
    incidence_ptr: Vec<usize>,
    incidence: Vec<(usize, usize)>,
}

impl Mesh {
    /// Builds a mesh from raw vertices, counterclockwise triangles and
    /// boundary flags given in any node order.
    ///
    /// Nodes are reordered so that interior nodes come first; the relative
    /// order within each group is preserved. [`Mesh::external_id`] maps back.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if boundary.len() != nv {
            return Err(MeshError::InvalidParameter(format!(
                "{} boundary flags for {} vertices",
                boundary.len(),
                nv
            )));
        }
        if triangles.is_empty() {
            return Err(MeshError::Empty);
        }
        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(MeshError::VertexOutOfRange {
                        triangle: t,
                        vertex: v,
                        count: nv,
                    });
                }
                used[v] = true;
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::NonpositiveArea { triangle: t, area });
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::DanglingVertex(v));
        }

        // interior-first permutation
        let mut external_ids: Vec<usize> = (0..nv).filter(|&v| !boundary[v]).collect();
        let n_interior = external_ids.len();
        external_ids.extend((0..nv).filter(|&v| boundary[v]));
        let mut internal_of = vec![0usize; nv];
        for (internal, &ext) in external_ids.iter().enumerate() {
            internal_of[ext] = internal;
        }
        let vertices: Vec<Point> = external_ids.iter().map(|&e| vertices[e]).collect();
        let boundary: Vec<bool> = external_ids.iter().map(|&e| boundary[e]).collect();
        let triangles: Vec<[usize; 3]> = triangles
            .iter()
            .map(|t| [internal_of[t[0]], internal_of[t[1]], internal_of[t[2]]])
            .collect();

        let mut areas = Vec::with_capacity(triangles.len());
        let mut gradients = Vec::with_capacity(triangles.len());
        let mut diameters = Vec::with_capacity(triangles.len());
        let mut l1_norms = vec![0.0; nv];
        for tri in &triangles {
            let [p0, p1, p2] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area = signed_area(p0, p1, p2);
            let two_a = 2.0 * area;
            gradients.push([
                [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
                [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
                [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
            ]);
            let edge = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
            diameters.push(edge(p0, p1).max(edge(p1, p2)).max(edge(p2, p0)));
            for &v in tri {
                l1_norms[v] += area / 3.0;
            }
            areas.push(area);
        }

        let mut counts = vec![0usize; nv + 1];
        for tri in &triangles {
            for &v in tri {
                counts[v + 1] += 1;
            }
        }
        for i in 0..nv {
            counts[i + 1] += counts[i];
        }
        let incidence_ptr = counts.clone();
        let mut fill = counts;
        let mut incidence = vec![(0, 0); incidence_ptr[nv]];
        for (k, tri) in triangles.iter().enumerate() {
            for (a, &v) in tri.iter().enumerate() {
                incidence[fill[v]] = (k, a);
                fill[v] += 1;
            }
        }

        Ok(Self {
            vertices,
            triangles,
            boundary,
            n_interior,
            areas,
            gradients,
            diameters,
            l1_norms,
            external_ids,
            incidence_ptr,
            incidence,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of interior nodes; these occupy indices `0..n_interior()`.
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn area(&self, k: usize) -> f64 {
        self.areas[k]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Constant gradients of the three hat functions on element `k`, in the
    /// local vertex order of `triangles()[k]`.
    pub fn hat_gradients(&self, k: usize) -> &[Point; 3] {
        &self.gradients[k]
    }

    /// Longest edge of element `k`.
    pub fn diameter(&self, k: usize) -> f64 {
        self.diameters[k]
    }

    /// Mesh size: the longest edge over all elements.
    pub fn mesh_size(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    /// `||phi_v||_{L1}`, the integral of the hat function of node `v`.
    pub fn l1_norm(&self, v: usize) -> f64 {
        self.l1_norms[v]
    }

    pub fn l1_norms(&self) -> &[f64] {
        &self.l1_norms
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [a, b, c] = self.triangles[k];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Edge midpoints of element `k`; the three-point rule on these is exact
    /// for quadratic integrands.
    pub fn edge_midpoints(&self, k: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[k];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let mid = |p: Point, q: Point| [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
        [mid(pa, pb), mid(pb, pc), mid(pc, pa)]
    }

    /// Elements containing node `v`, as `(element, local vertex index)`.
    pub fn elements_of(&self, v: usize) -> &[(usize, usize)] {
        &self.incidence[self.incidence_ptr[v]..self.incidence_ptr[v + 1]]
    }

    /// Index of internal node `v` in the ordering the mesh was built from.
    pub fn external_id(&self, v: usize) -> usize {
        self.external_ids[v]
    }

    pub fn external_ids(&self) -> &[usize] {
        &self.external_ids
    }

    /// Index of the node closest to `p` (lowest index on ties).
    pub fn nearest_node(&self, p: Point, interior_only: bool) -> Option<usize> {
        let range = if interior_only {
            0..self.n_interior
        } else {
            0..self.vertices.len()
        };
        let mut best: Option<(usize, f64)> = None;
        for v in range {
            let q = self.vertices[v];
            let d = (q[0] - p[0]).hypot(q[1] - p[1]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
        best.map(|(v, _)| v)
    }

    /// Evaluates the P1 function with nodal `coefficients` at a point of
    /// element `k` given in barycentric coordinates.
    pub fn interpolate_in(&self, k: usize, coefficients: &[f64], barycentric: [f64; 3]) -> f64 {
        let tri = self.triangles[k];
        (0..3).map(|a| coefficients[tri[a]] * barycentric[a]).sum()
    }

    /// Gradient of the P1 function with nodal `coefficients` on element `k`.
    pub fn gradient_in(&self, k: usize, coefficients: &[f64]) -> Point {
        let tri = self.triangles[k];
        let g = &self.gradients[k];
        let mut out = [0.0; 2];
        for a in 0..3 {
            out[0] += coefficients[tri[a]] * g[a][0];
            out[1] += coefficients[tri[a]] * g[a][1];
        }
        out
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, f: F) -> Vec<f64> {
        self.vertices.iter().map(|&p| f(p)).collect()
    }
}

pub(crate) fn signed_area(p0: Point, p1: Point, p2: Point) -> f64 {
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}
