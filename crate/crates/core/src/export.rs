//! Field output: `x,y,value` CSV, triangle CSV and legacy ASCII VTK.

use std::fmt::Write as _;

use crate::mesh::Mesh;

/// Nodal values as CSV with header `x,y,value`, one row per vertex.
pub fn values_csv(mesh: &Mesh, values: &[f64]) -> String {
    let mut out = String::from("x,y,value\n");
    for (p, v) in mesh.vertices().iter().zip(values) {
        let _ = writeln!(out, "{:.17e},{:.17e},{:.17e}", p[0], p[1], v);
    }
    out
}

/// Triangles as CSV with header `v0,v1,v2`; indices refer to the rows of
/// [`values_csv`].
pub fn triangles_csv(mesh: &Mesh) -> String {
    let mut out = String::from("v0,v1,v2\n");
    for t in mesh.triangles() {
        let _ = writeln!(out, "{},{},{}", t[0], t[1], t[2]);
    }
    out
}

/// Legacy ASCII unstructured grid with one point-data scalar.
pub fn values_vtk(mesh: &Mesh, values: &[f64], name: &str, title: &str) -> String {
    let mut out = String::new();
    let title: String = title.chars().filter(|c| *c != '\n').take(255).collect();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let nt = mesh.n_triangles();
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {}\nSCALARS {name} double 1\nLOOKUP_TABLE default", mesh.n_vertices());
    for v in values {
        let _ = writeln!(out, "{v:.17e}");
    }
    out
}

/// Parses the `value` column of [`values_csv`] output.
pub fn parse_values_csv(text: &str) -> Result<Vec<[f64; 3]>, String> {
    let mut lines = text.lines();
    if lines.next() != Some("x,y,value") {
        return Err("missing header x,y,value".into());
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<f64> = l
                .split(',')
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("line {}: {e}", i + 2))?;
            match f[..] {
                [x, y, v] => Ok([x, y, v]),
                _ => Err(format!("line {}: expected 3 fields", i + 2)),
            }
        })
        .collect()
}
