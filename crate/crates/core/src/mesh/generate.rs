use std::f64::consts::PI;

use super::{signed_area, Mesh, Point};
use crate::error::MeshError;

/// Equilateral triangle with vertices `(±√3, 1/2)` and `(0, -5/2)`, uniformly
/// refined `level` times.
///
/// Every refinement splits each triangle into four congruent children, so all
/// elements stay equilateral and the mesh size is `2√3 · 2^-level`.
pub fn generate_triangle_mesh(level: u32) -> Mesh {
    let s3 = 3f64.sqrt();
    let v0: Point = [0.0, -2.5];
    let e1: Point = [s3, 3.0];
    let e2: Point = [-s3, 3.0];
    let n = 1usize << level;

    // lattice node (i, j), i + j <= n
    let index = |i: usize, j: usize| -> usize {
        // rows of constant j hold n + 1 - j nodes
        j * (n + 1) - j * (j.saturating_sub(1)) / 2 + i
    };
    let mut vertices = Vec::with_capacity((n + 1) * (n + 2) / 2);
    let mut boundary = Vec::with_capacity(vertices.capacity());
    for j in 0..=n {
        for i in 0..=(n - j) {
            let (a, b) = (i as f64 / n as f64, j as f64 / n as f64);
            vertices.push([v0[0] + a * e1[0] + b * e2[0], v0[1] + a * e1[1] + b * e2[1]]);
            boundary.push(i == 0 || j == 0 || i + j == n);
        }
    }
    debug_assert_eq!(index(n, 0) + 1, n + 1);
    debug_assert_eq!(index(0, n) + 1, vertices.len());

    let mut triangles = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..(n - j) {
            triangles.push([index(i, j), index(i + 1, j), index(i, j + 1)]);
            if i + j + 2 <= n {
                triangles.push([index(i + 1, j), index(i + 1, j + 1), index(i, j + 1)]);
            }
        }
    }
    Mesh::from_parts(vertices, triangles, boundary).expect("lattice triangulation is valid")
}

/// Annulus `r <= |x| <= R` meshed by `n_radial` concentric rings of
/// `n_angular` nodes each.
///
/// Consecutive rings are rotated against each other by half an angular step
/// and their radii grow geometrically, so every strip between two rings is a
/// scaled copy of the first one and all elements of a strip are congruent
/// isosceles triangles. Whether the result is strictly acute depends on the
/// ratio of ring spacing to angular step; use
/// [`check_strict_acuteness`](super::check_strict_acuteness).
pub fn generate_annulus_mesh(
    r: f64,
    big_r: f64,
    n_radial: usize,
    n_angular: usize,
) -> Result<Mesh, MeshError> {
    if !(r > 0.0 && big_r > r && big_r.is_finite()) {
        return Err(MeshError::InvalidParameter(format!(
            "annulus radii must satisfy 0 < r < R, got r = {r}, R = {big_r}"
        )));
    }
    if n_radial < 2 {
        return Err(MeshError::InvalidParameter(format!(
            "n_radial must be at least 2, got {n_radial}"
        )));
    }
    if n_angular < 8 {
        return Err(MeshError::InvalidParameter(format!(
            "n_angular must be at least 8, got {n_angular}"
        )));
    }
    let ratio = (big_r / r).powf(1.0 / (n_radial - 1) as f64);
    let step = 2.0 * PI / n_angular as f64;
    let mut vertices = Vec::with_capacity(n_radial * n_angular);
    let mut boundary = Vec::with_capacity(n_radial * n_angular);
    for ring in 0..n_radial {
        let radius = match ring {
            0 => r,
            _ if ring == n_radial - 1 => big_r,
            _ => r * ratio.powi(ring as i32),
        };
        let offset = if ring % 2 == 0 { 0.0 } else { 0.5 };
        for i in 0..n_angular {
            let phi = (i as f64 + offset) * step;
            vertices.push([radius * phi.cos(), radius * phi.sin()]);
            boundary.push(ring == 0 || ring == n_radial - 1);
        }
    }
    let id = |ring: usize, i: usize| ring * n_angular + i % n_angular;
    let mut triangles = Vec::with_capacity(2 * (n_radial - 1) * n_angular);
    for ring in 0..n_radial - 1 {
        let (inner, outer) = (ring, ring + 1);
        for i in 0..n_angular {
            let pair = if ring % 2 == 0 {
                // outer node i sits between inner nodes i and i + 1
                [
                    [id(inner, i), id(inner, i + 1), id(outer, i)],
                    [id(inner, i + 1), id(outer, i + 1), id(outer, i)],
                ]
            } else {
                // inner node i sits between outer nodes i and i + 1
                [
                    [id(inner, i), id(outer, i + 1), id(outer, i)],
                    [id(inner, i), id(inner, i + 1), id(outer, i + 1)],
                ]
            };
            for mut tri in pair {
                if signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]) < 0.0 {
                    tri.swap(1, 2);
                }
                triangles.push(tri);
            }
        }
    }
    Mesh::from_parts(vertices, triangles, boundary)
}
