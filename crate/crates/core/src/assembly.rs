//! Discrete operators of the scheme.
//!
//! For every control pair the explicit matrix `E`, the implicit matrix `I`
//! and the load vector `F` are assembled against the `L1`-normalized hat
//! functions `φ̂_ℓ = φ_ℓ / ||φ_ℓ||_{L1}`. On an interior row `ℓ`
//!
//! ```text
//! (E w)_ℓ = ā(y_ℓ) <∇w, ∇φ̂_ℓ> + <-b̄·∇w + c̄ w, φ̂_ℓ>
//! (I w)_ℓ = ā̄(y_ℓ) <∇w, ∇φ̂_ℓ> + <-b̄̄·∇w + c̄̄ w, φ̂_ℓ>
//! F_ℓ     = <f, φ̂_ℓ>
//! ```
//!
//! Diffusion is sampled at the row node, advection, reaction and forcing at
//! element centroids. On a boundary row `E` is zero, `I` is the identity row
//! and `F` carries the boundary datum.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::AssemblyError;
use crate::mesh::{dot, Mesh, Point};
use crate::sparse::{CsrMatrix, SparsePattern};

/// A coefficient given as a constant, nodal values or a function of space.
#[derive(Clone)]
pub enum CoefficientField<T> {
    Constant(T),
    /// One value per mesh node, interpolated linearly inside elements.
    PerNode(Vec<T>),
    Function(Arc<dyn Fn(Point) -> T + Send + Sync>),
}

impl<T: std::fmt::Debug> std::fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Self::PerNode(v) => f.debug_tuple("PerNode").field(&v.len()).finish(),
            Self::Function(_) => f.write_str("Function(..)"),
        }
    }
}

pub trait Interpolate: Copy {
    fn combine(values: [Self; 3], weights: [f64; 3]) -> Self;
}

impl Interpolate for f64 {
    fn combine(v: [f64; 3], w: [f64; 3]) -> f64 {
        v[0] * w[0] + v[1] * w[1] + v[2] * w[2]
    }
}

impl Interpolate for Point {
    fn combine(v: [Point; 3], w: [f64; 3]) -> Point {
        [
            v[0][0] * w[0] + v[1][0] * w[1] + v[2][0] * w[2],
            v[0][1] * w[0] + v[1][1] * w[1] + v[2][1] * w[2],
        ]
    }
}

impl<T: Interpolate> CoefficientField<T> {
    pub fn function(f: impl Fn(Point) -> T + Send + Sync + 'static) -> Self {
        Self::Function(Arc::new(f))
    }

    pub fn at_node(&self, mesh: &Mesh, v: usize) -> T {
        match self {
            Self::Constant(c) => *c,
            Self::PerNode(values) => values[v],
            Self::Function(f) => f(mesh.vertex(v)),
        }
    }

    /// Value at the point of element `k` with the given barycentric
    /// coordinates.
    pub fn in_element(&self, mesh: &Mesh, k: usize, barycentric: [f64; 3]) -> T {
        let tri = mesh.triangles()[k];
        match self {
            Self::Constant(c) => *c,
            Self::PerNode(values) => T::combine([values[tri[0]], values[tri[1]], values[tri[2]]], barycentric),
            Self::Function(f) => {
                let p = [0, 1].map(|d| (0..3).map(|a| barycentric[a] * mesh.vertex(tri[a])[d]).sum());
                f(p)
            }
        }
    }

    pub fn at_centroid(&self, mesh: &Mesh, k: usize) -> T {
        self.in_element(mesh, k, [1.0 / 3.0; 3])
    }
}

/// Sparsity pattern of a mesh plus the value slots of every element's
/// local 3x3 block.
#[derive(Debug, Clone)]
pub struct Assembler {
    pattern: Arc<SparsePattern>,
    slots: Vec<[[usize; 3]; 3]>,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let pattern = Arc::new(SparsePattern::from_mesh(mesh));
        let slots = mesh
            .triangles()
            .iter()
            .map(|tri| {
                let mut s = [[0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        s[a][b] = pattern.position(tri[a], tri[b]).expect("element coupling in pattern");
                    }
                }
                s
            })
            .collect();
        Self { pattern, slots }
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }
}

/// Row-normalized building blocks of the operators; every row, boundary rows
/// included, is tested against `φ̂_ℓ`.
#[derive(Debug, Clone)]
pub struct Templates {
    /// `S_ℓj = <∇φ_j, ∇φ̂_ℓ>`
    pub stiffness: CsrMatrix,
    /// `(B_x)_ℓj = <∂_x φ_j, φ̂_ℓ>`
    pub advection_x: CsrMatrix,
    /// `(B_y)_ℓj = <∂_y φ_j, φ̂_ℓ>`
    pub advection_y: CsrMatrix,
    /// `M_ℓj = <φ_j, φ̂_ℓ>`
    pub mass: CsrMatrix,
}

pub fn assemble_templates(assembler: &Assembler, mesh: &Mesh) -> Templates {
    let p = assembler.pattern.clone();
    let mut s = CsrMatrix::zeros(p.clone());
    let mut bx = CsrMatrix::zeros(p.clone());
    let mut by = CsrMatrix::zeros(p.clone());
    let mut m = CsrMatrix::zeros(p);
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.hat_gradients(k);
        let area = mesh.area(k);
        for a in 0..3 {
            let inv = 1.0 / mesh.l1_norm(tri[a]);
            for b in 0..3 {
                let slot = assembler.slots[k][a][b];
                s.values[slot] += dot(g[a], g[b]) * area * inv;
                bx.values[slot] += g[b][0] * area / 3.0 * inv;
                by.values[slot] += g[b][1] * area / 3.0 * inv;
                let mass = if a == b { area / 6.0 } else { area / 12.0 };
                m.values[slot] += mass * inv;
            }
        }
    }
    Templates {
        stiffness: s,
        advection_x: bx,
        advection_y: by,
        mass: m,
    }
}

/// Coefficients of one side (explicit or implicit) of the splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct SideCoefficients {
    /// Diffusion at each node.
    pub diffusion: Vec<f64>,
    /// Advection at each element centroid.
    pub advection: Vec<Point>,
    /// Reaction at each element centroid.
    pub reaction: Vec<f64>,
}

impl SideCoefficients {
    pub fn zero(mesh: &Mesh) -> Self {
        Self {
            diffusion: vec![0.0; mesh.n_vertices()],
            advection: vec![[0.0; 2]; mesh.n_triangles()],
            reaction: vec![0.0; mesh.n_triangles()],
        }
    }
}

/// Split coefficients of one control pair, ready for assembly.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCoefficients {
    pub explicit: SideCoefficients,
    pub implicit: SideCoefficients,
    /// Forcing at each element centroid.
    pub forcing: Vec<f64>,
}

/// `E`, `I` and `F` of one control pair on a shared pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPair {
    pub explicit: Vec<f64>,
    pub implicit: Vec<f64>,
    pub load: Vec<f64>,
}

/// Assembles `E`, `I` and `F` for one control pair.
///
/// `boundary_load[ℓ]` is used as `F_ℓ` on boundary rows and ignored on
/// interior rows.
pub fn assemble_operator_pair(
    assembler: &Assembler,
    mesh: &Mesh,
    coefficients: &PairCoefficients,
    boundary_load: &[f64],
) -> Result<OperatorPair, AssemblyError> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let check_len = |expected: usize, got: usize| {
        if expected == got {
            Ok(())
        } else {
            Err(AssemblyError::Dimension { expected, got })
        }
    };
    check_len(nv, boundary_load.len())?;
    check_len(nt, coefficients.forcing.len())?;
    for side in [&coefficients.explicit, &coefficients.implicit] {
        check_len(nv, side.diffusion.len())?;
        check_len(nt, side.advection.len())?;
        check_len(nt, side.reaction.len())?;
    }

    let n_interior = mesh.n_interior();
    let nnz = assembler.pattern.nnz();
    let mut explicit = vec![0.0; nnz];
    let mut implicit = vec![0.0; nnz];
    let mut load = vec![0.0; nv];
    let (ex, im) = (&coefficients.explicit, &coefficients.implicit);
    for (k, tri) in mesh.triangles().iter().enumerate() {
        for (c, bvec) in [(ex.reaction[k], ex.advection[k]), (im.reaction[k], im.advection[k])] {
            if !(c.is_finite() && bvec[0].is_finite() && bvec[1].is_finite()) {
                return Err(AssemblyError::NonFinite { element: k });
            }
            if c < 0.0 {
                return Err(AssemblyError::NegativeReaction { element: k, value: c });
            }
        }
        let f = coefficients.forcing[k];
        if !f.is_finite() {
            return Err(AssemblyError::NonFinite { element: k });
        }
        let g = mesh.hat_gradients(k);
        let area = mesh.area(k);
        for a in 0..3 {
            let row = tri[a];
            if row >= n_interior {
                continue;
            }
            let inv = 1.0 / mesh.l1_norm(row);
            let (ae, ai) = (ex.diffusion[row], im.diffusion[row]);
            for b in 0..3 {
                let slot = assembler.slots[k][a][b];
                let stiff = dot(g[a], g[b]) * area;
                let mass = if a == b { area / 6.0 } else { area / 12.0 };
                explicit[slot] += (ae * stiff - dot(ex.advection[k], g[b]) * area / 3.0 + ex.reaction[k] * mass) * inv;
                implicit[slot] += (ai * stiff - dot(im.advection[k], g[b]) * area / 3.0 + im.reaction[k] * mass) * inv;
            }
            load[row] += f * area / 3.0 * inv;
        }
    }
    for row in 0..nv {
        if !(ex.diffusion[row].is_finite() && im.diffusion[row].is_finite()) {
            return Err(AssemblyError::NonFinite {
                element: mesh.elements_of(row)[0].0,
            });
        }
    }
    for row in n_interior..nv {
        implicit[assembler.pattern.diag_pos(row)] = 1.0;
        load[row] = boundary_load[row];
    }
    Ok(OperatorPair {
        explicit,
        implicit,
        load,
    })
}

/// Adds `-b_ℓ·<∇w, φ̂_ℓ>` to the interior rows of `values`, with a
/// separate advection vector `row_advection[ℓ]` frozen on each row.
pub fn add_row_frozen_advection(values: &mut [f64], templates: &Templates, row_advection: &[Point], n_interior: usize) {
    let p = &templates.advection_x.pattern;
    for (row, b) in row_advection.iter().enumerate().take(n_interior) {
        for pos in p.row_range(row) {
            values[pos] -= b[0] * templates.advection_x.values[pos] + b[1] * templates.advection_y.values[pos];
        }
    }
}

/// All operators of one time step, indexed by control pair.
///
/// Pair `p` corresponds to `(alpha, beta) = (p % n_alpha, p / n_alpha)`.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    pattern: Arc<SparsePattern>,
    n_interior: usize,
    n_alpha: usize,
    n_beta: usize,
    pairs: Vec<OperatorPair>,
}

impl OperatorFamily {
    pub fn new(
        pattern: Arc<SparsePattern>,
        n_interior: usize,
        n_alpha: usize,
        n_beta: usize,
        pairs: Vec<OperatorPair>,
    ) -> Result<Self, AssemblyError> {
        let n = pattern.dim();
        if pairs.len() != n_alpha * n_beta || pairs.is_empty() {
            return Err(AssemblyError::Dimension {
                expected: n_alpha * n_beta,
                got: pairs.len(),
            });
        }
        for p in &pairs {
            for (expected, got) in [
                (pattern.nnz(), p.explicit.len()),
                (pattern.nnz(), p.implicit.len()),
                (n, p.load.len()),
            ] {
                if expected != got {
                    return Err(AssemblyError::Dimension { expected, got });
                }
            }
        }
        Ok(Self {
            pattern,
            n_interior: n_interior.min(n),
            n_alpha,
            n_beta,
            pairs,
        })
    }

    /// Family from dense matrices, one `(E, I, F)` per pair in pair order.
    pub fn from_dense(
        n_interior: usize,
        n_alpha: usize,
        n_beta: usize,
        pairs: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)>,
    ) -> Result<Self, AssemblyError> {
        let n = pairs.first().map_or(0, |p| p.2.len());
        let pattern = Arc::new(SparsePattern::dense(n));
        let flatten = |m: &Vec<Vec<f64>>| -> Result<Vec<f64>, AssemblyError> {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(AssemblyError::Dimension {
                    expected: n,
                    got: m.len(),
                });
            }
            Ok(m.iter().flatten().copied().collect())
        };
        let pairs = pairs
            .iter()
            .map(|(e, i, f)| {
                Ok(OperatorPair {
                    explicit: flatten(e)?,
                    implicit: flatten(i)?,
                    load: f.clone(),
                })
            })
            .collect::<Result<Vec<_>, AssemblyError>>()?;
        Self::new(pattern, n_interior, n_alpha, n_beta, pairs)
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_index(&self, alpha: usize, beta: usize) -> usize {
        beta * self.n_alpha + alpha
    }

    pub fn pattern(&self) -> &Arc<SparsePattern> {
        &self.pattern
    }

    pub fn pair(&self, p: usize) -> &OperatorPair {
        &self.pairs[p]
    }

    pub fn pairs(&self) -> &[OperatorPair] {
        &self.pairs
    }

    pub fn explicit_matrix(&self, p: usize) -> CsrMatrix {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.pairs[p].explicit.clone(),
        }
    }

    pub fn implicit_matrix(&self, p: usize) -> CsrMatrix {
        CsrMatrix {
            pattern: self.pattern.clone(),
            values: self.pairs[p].implicit.clone(),
        }
    }

    /// Row `ℓ` of `Ψ^{(α,β)}(u, w) = (hI + Id)u + (hE - Id)w - hF`.
    #[inline]
    pub fn psi_row(&self, pair: usize, row: usize, u: &[f64], w: &[f64], h: f64) -> f64 {
        let op = &self.pairs[pair];
        let iu = self.pattern.row_dot(&op.implicit, row, u);
        let ew = self.pattern.row_dot(&op.explicit, row, w);
        h * iu + u[row] + h * ew - w[row] - h * op.load[row]
    }

    pub(crate) fn check_dim(&self, len: usize) -> Result<(), AssemblyError> {
        if len == self.dim() {
            Ok(())
        } else {
            Err(AssemblyError::Dimension {
                expected: self.dim(),
                got: len,
            })
        }
    }
}

/// Node-wise value of the scheme operator together with the optimal controls.
#[derive(Debug, Clone, PartialEq)]
pub struct InfSupEvaluation {
    /// `min_β max_α Ψ^{(α,β)}(w_now, w_next)_ℓ`
    pub residual: Vec<f64>,
    /// Minimizing `β` index per node.
    pub beta: Vec<usize>,
    /// Maximizing `α` index for the chosen `β`, per node.
    pub alpha: Vec<usize>,
}

/// Evaluates the inf-sup of `Ψ` row by row. Ties go to the lowest control
/// index.
pub fn evaluate_infsup_residual(
    family: &OperatorFamily,
    w_now: &[f64],
    w_next: &[f64],
    h: f64,
) -> Result<InfSupEvaluation, AssemblyError> {
    family.check_dim(w_now.len())?;
    family.check_dim(w_next.len())?;
    let rows: Vec<(f64, usize, usize)> = (0..family.dim())
        .into_par_iter()
        .map(|row| minmax_row(family, row, w_now, w_next, h))
        .collect();
    let mut out = InfSupEvaluation {
        residual: Vec::with_capacity(rows.len()),
        beta: Vec::with_capacity(rows.len()),
        alpha: Vec::with_capacity(rows.len()),
    };
    for (r, b, a) in rows {
        out.residual.push(r);
        out.beta.push(b);
        out.alpha.push(a);
    }
    Ok(out)
}

/// `(value, beta, alpha)` of `min_β max_α Ψ` on one row.
pub(crate) fn minmax_row(family: &OperatorFamily, row: usize, u: &[f64], w: &[f64], h: f64) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 0);
    for beta in 0..family.n_beta {
        let (value, alpha) = max_alpha_row(family, row, beta, u, w, h);
        if value < best.0 {
            best = (value, beta, alpha);
        }
    }
    best
}

/// `(value, alpha)` of `max_α Ψ^{(α,β)}` on one row for fixed `β`.
#[inline]
pub(crate) fn max_alpha_row(family: &OperatorFamily, row: usize, beta: usize, u: &[f64], w: &[f64], h: f64) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for alpha in 0..family.n_alpha {
        let v = family.psi_row(family.pair_index(alpha, beta), row, u, w, h);
        if v > best.0 {
            best = (v, alpha);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_triangle_mesh;

    fn right_triangle() -> Mesh {
        Mesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![true; 3],
        )
        .unwrap()
    }

    #[test]
    fn right_triangle_templates() {
        let m = right_triangle();
        let asm = Assembler::new(&m);
        let t = assemble_templates(&asm, &m);
        // unnormalized <∇φ_0, ∇φ_0> = |(-1,-1)|^2 · 1/2 = 1
        assert!((t.stiffness.get(0, 0) * m.l1_norm(0) - 1.0).abs() < 1e-15);
        for v in 0..3 {
            assert!((t.mass.row_sum(v) * m.l1_norm(v) - m.l1_norm(v)).abs() < 1e-15);
        }
    }

    #[test]
    fn template_row_sums() {
        let m = generate_triangle_mesh(3);
        let asm = Assembler::new(&m);
        let t = assemble_templates(&asm, &m);
        for v in 0..m.n_vertices() {
            assert!(t.stiffness.row_sum(v).abs() < 1e-12);
            assert!((t.mass.row_sum(v) - 1.0).abs() < 1e-12);
        }
        for v in 0..m.n_interior() {
            assert!(t.advection_x.row_sum(v).abs() < 1e-12);
            assert!(t.advection_y.row_sum(v).abs() < 1e-12);
        }
    }

    fn pure_implicit_laplacian(m: &Mesh) -> PairCoefficients {
        let mut implicit = SideCoefficients::zero(m);
        implicit.diffusion.iter_mut().for_each(|a| *a = 1.0);
        PairCoefficients {
            explicit: SideCoefficients::zero(m),
            implicit,
            forcing: vec![0.0; m.n_triangles()],
        }
    }

    #[test]
    fn pure_implicit_laplacian_rows() {
        let m = generate_triangle_mesh(3);
        let asm = Assembler::new(&m);
        let t = assemble_templates(&asm, &m);
        let pair = assemble_operator_pair(&asm, &m, &pure_implicit_laplacian(&m), &vec![0.0; m.n_vertices()]).unwrap();
        let p = asm.pattern();
        for row in 0..m.n_vertices() {
            for pos in p.row_range(row) {
                assert_eq!(pair.explicit[pos], 0.0);
                if row < m.n_interior() {
                    assert!((pair.implicit[pos] - t.stiffness.values[pos]).abs() < 1e-12);
                } else {
                    let expected = if p.col_indices()[pos] == row { 1.0 } else { 0.0 };
                    assert_eq!(pair.implicit[pos], expected);
                }
            }
        }
    }

    #[test]
    fn unit_forcing_gives_unit_load() {
        let m = generate_triangle_mesh(3);
        let asm = Assembler::new(&m);
        let mut c = pure_implicit_laplacian(&m);
        c.forcing.iter_mut().for_each(|f| *f = 1.0);
        let pair = assemble_operator_pair(&asm, &m, &c, &vec![7.0; m.n_vertices()]).unwrap();
        for row in 0..m.n_vertices() {
            let expected = if row < m.n_interior() { 1.0 } else { 7.0 };
            assert!((pair.load[row] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_reaction_is_rejected() {
        let m = generate_triangle_mesh(2);
        let asm = Assembler::new(&m);
        let mut c = pure_implicit_laplacian(&m);
        c.implicit.reaction[3] = -1.0;
        let err = assemble_operator_pair(&asm, &m, &c, &vec![0.0; m.n_vertices()]).unwrap_err();
        assert_eq!(err, AssemblyError::NegativeReaction { element: 3, value: -1.0 });
    }

    #[test]
    fn constants_see_only_reaction() {
        let m = generate_triangle_mesh(3);
        let asm = Assembler::new(&m);
        let nt = m.n_triangles();
        let c = PairCoefficients {
            explicit: SideCoefficients {
                diffusion: (0..m.n_vertices()).map(|v| 0.3 + v as f64 * 0.01).collect(),
                advection: (0..nt).map(|k| [k as f64 * 0.1, -1.0]).collect(),
                reaction: (0..nt).map(|k| (k % 5) as f64).collect(),
            },
            implicit: SideCoefficients {
                diffusion: vec![2.0; m.n_vertices()],
                advection: vec![[0.5, 0.25]; nt],
                reaction: vec![1.5; nt],
            },
            forcing: vec![0.0; nt],
        };
        let pair = assemble_operator_pair(&asm, &m, &c, &vec![0.0; m.n_vertices()]).unwrap();
        let ones = vec![1.0; m.n_vertices()];
        let e1 = asm.pattern().mat_vec(&pair.explicit, &ones);
        let i1 = asm.pattern().mat_vec(&pair.implicit, &ones);
        for row in 0..m.n_interior() {
            // <c, φ̂_ℓ> with c piecewise constant
            let ce: f64 = m
                .elements_of(row)
                .iter()
                .map(|&(k, _)| c.explicit.reaction[k] * m.area(k) / 3.0)
                .sum::<f64>()
                / m.l1_norm(row);
            assert!((e1[row] - ce).abs() < 1e-12, "{} vs {}", e1[row], ce);
            assert!((i1[row] - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn template_and_direct_paths_agree_for_constant_coefficients() {
        let m = generate_triangle_mesh(4);
        let asm = Assembler::new(&m);
        let t = assemble_templates(&asm, &m);
        let nt = m.n_triangles();
        let diffusion: Vec<f64> = m.vertices().iter().map(|p| 0.25 * p[0].hypot(p[1])).collect();
        let b = [0.3, -0.7];
        let c = 0.4;
        let coeffs = PairCoefficients {
            explicit: SideCoefficients {
                diffusion: diffusion.clone(),
                advection: vec![b; nt],
                reaction: vec![c; nt],
            },
            implicit: SideCoefficients::zero(&m),
            forcing: vec![0.0; nt],
        };
        let pair = assemble_operator_pair(&asm, &m, &coeffs, &vec![0.0; m.n_vertices()]).unwrap();
        let p = asm.pattern();
        for row in 0..m.n_interior() {
            for pos in p.row_range(row) {
                let via_templates = diffusion[row] * t.stiffness.values[pos]
                    - b[0] * t.advection_x.values[pos]
                    - b[1] * t.advection_y.values[pos]
                    + c * t.mass.values[pos];
                assert!((pair.explicit[pos] - via_templates).abs() < 1e-12);
            }
        }

        let mut row_frozen = vec![0.0; p.nnz()];
        add_row_frozen_advection(&mut row_frozen, &t, &vec![b; m.n_vertices()], m.n_interior());
        let mut no_adv = coeffs.clone();
        no_adv.explicit.advection = vec![[0.0; 2]; nt];
        let base = assemble_operator_pair(&asm, &m, &no_adv, &vec![0.0; m.n_vertices()]).unwrap();
        for pos in 0..p.nnz() {
            assert!((base.explicit[pos] + row_frozen[pos] - pair.explicit[pos]).abs() < 1e-12);
        }
    }

    #[test]
    fn coefficient_fields_agree() {
        let m = generate_triangle_mesh(2);
        let f = |p: Point| 1.0 + 2.0 * p[0] - p[1];
        let nodal = CoefficientField::PerNode(m.interpolate(f));
        let func = CoefficientField::function(f);
        for k in 0..m.n_triangles() {
            assert!((nodal.at_centroid(&m, k) - func.at_centroid(&m, k)).abs() < 1e-12);
        }
        assert_eq!(CoefficientField::Constant(2.0).at_node(&m, 0), 2.0);
    }

    fn two_node_family(values: [[f64; 4]; 4]) -> OperatorFamily {
        // pair p: E = diag(-v0, -v1)·0.1, I = [[2,-1],[-1,2]] + v2, F = (v3, v3)
        let pairs = values
            .iter()
            .map(|v| {
                (
                    vec![vec![0.1 * v[0], 0.0], vec![0.0, 0.1 * v[1]]],
                    vec![vec![2.0 + v[2], -1.0], vec![-1.0, 2.0 + v[2]]],
                    vec![v[3], -v[3]],
                )
            })
            .collect();
        OperatorFamily::from_dense(2, 2, 2, pairs).unwrap()
    }

    #[test]
    fn single_pair_residual_is_psi() {
        let fam = OperatorFamily::from_dense(
            1,
            1,
            1,
            vec![(vec![vec![0.5, 0.0], vec![0.0, 0.0]], vec![vec![2.0, -1.0], vec![0.0, 1.0]], vec![3.0, 4.0])],
        )
        .unwrap();
        let (u, w, h) = ([1.0, 2.0], [0.5, 2.0], 0.1);
        let ev = evaluate_infsup_residual(&fam, &u, &w, h).unwrap();
        // row 0: h(2·1 - 2) + 1 + h·0.25 - 0.5 - 0.3
        assert!((ev.residual[0] - (0.0 + 1.0 + 0.025 - 0.5 - 0.3)).abs() < 1e-15);
        // boundary row: (1 + h)u - w - hF
        assert!((ev.residual[1] - (1.1 * 2.0 - 2.0 - 0.4)).abs() < 1e-15);
    }

    #[test]
    fn identical_controls_pick_index_zero() {
        let fam = two_node_family([[1.0, 2.0, 0.0, 1.0]; 4]);
        let ev = evaluate_infsup_residual(&fam, &[0.3, -0.2], &[1.0, 0.5], 0.5).unwrap();
        assert_eq!(ev.alpha, vec![0, 0]);
        assert_eq!(ev.beta, vec![0, 0]);
    }

    #[test]
    fn residual_matches_enumeration() {
        let fam = two_node_family([[1.0, 2.0, 0.0, 1.0], [3.0, 0.0, 1.0, -2.0], [0.0, 1.0, 2.0, 0.0], [2.0, 2.0, 0.5, 3.0]]);
        let (u, w, h) = ([0.3, -0.2], [1.0, 0.5], 0.5);
        let ev = evaluate_infsup_residual(&fam, &u, &w, h).unwrap();
        for row in 0..2 {
            let mut best_over_beta = f64::INFINITY;
            for beta in 0..2 {
                let mut best_over_alpha = f64::NEG_INFINITY;
                for alpha in 0..2 {
                    best_over_alpha = best_over_alpha.max(fam.psi_row(beta * 2 + alpha, row, &u, &w, h));
                }
                best_over_beta = best_over_beta.min(best_over_alpha);
            }
            assert_eq!(ev.residual[row], best_over_beta);
        }
        assert!(evaluate_infsup_residual(&fam, &[0.0], &w, h).is_err());
    }
}
