//! Plain-text mesh format.
//!
//! ```text
//! # comment
//! nv nt
//! x y boundary_flag        (nv lines, flag is 0 or 1)
//! i j k                    (nt lines, 0-based, counterclockwise)
//! ```

use std::fmt::Write as _;

use super::{signed_area, Mesh};
use crate::error::MeshError;

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        line,
        message: message.into(),
    }
}

pub fn load_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (header_line, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let counts: Vec<&str> = header.split_whitespace().collect();
    if counts.len() != 2 {
        return Err(parse_err(header_line, "header must be `nv nt`"));
    }
    let parse_count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(header_line, format!("invalid count '{s}'")))
    };
    let (nv, nt) = (parse_count(counts[0])?, parse_count(counts[1])?);

    let mut vertices = Vec::with_capacity(nv);
    let mut boundary = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count(), "unexpected end of file in vertex block"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(ln, "vertex line must be `x y boundary_flag`"));
        }
        let coord = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(ln, format!("invalid coordinate '{s}'")))
        };
        vertices.push([coord(f[0])?, coord(f[1])?]);
        boundary.push(match f[2] {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(ln, format!("boundary flag must be 0 or 1, got '{other}'"))),
        });
    }

    let mut triangles = Vec::with_capacity(nt);
    let mut triangle_lines = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| parse_err(text.lines().count(), "unexpected end of file in triangle block"))?;
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(parse_err(ln, "triangle line must be `i j k`"));
        }
        let mut tri = [0usize; 3];
        for (slot, s) in tri.iter_mut().zip(&f) {
            *slot = s
                .parse()
                .map_err(|_| parse_err(ln, format!("invalid vertex index '{s}'")))?;
            if *slot >= nv {
                return Err(parse_err(
                    ln,
                    format!("vertex index out of range: {} (mesh has {nv} vertices)", *slot),
                ));
            }
        }
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if !(area > 0.0) {
            return Err(parse_err(ln, format!("nonpositive area {area:e}")));
        }
        triangles.push(tri);
        triangle_lines.push(ln);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content after triangle block"));
    }

    Mesh::from_parts(vertices, triangles, boundary).map_err(|e| match e {
        MeshError::DanglingVertex(v) => parse_err(header_line, format!("vertex {v} belongs to no triangle")),
        MeshError::Empty => parse_err(header_line, "mesh has no triangles"),
        other => other,
    })
}

/// Writes the mesh in internal (interior-first) node order.
pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", mesh.n_vertices(), mesh.n_triangles());
    for (v, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(out, "{:e} {:e} {}", p[0], p[1], u8::from(mesh.is_boundary(v)));
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}
