//! Artificial diffusion and the monotonicity checks of the scheme.
//!
//! On a mesh whose hat gradients satisfy
//! `∇φ_ℓ·∇φ_j <= -sin(θ)|∇φ_ℓ||∇φ_j|` for `ℓ != j`, adding a nodal diffusion
//! `ν_ℓ` with
//!
//! ```text
//! |b|_K + Δx_K ||c||_{L∞(K)} <= ν_ℓ sin(θ) |∇φ̂_ℓ|_K vol(K)
//! ```
//!
//! on every element `K` at `y_ℓ` makes all off-diagonal entries of row `ℓ`
//! non-positive.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::assembly::{CoefficientField, OperatorFamily, PairCoefficients, SideCoefficients};
use crate::error::StabilizationError;
use crate::linalg::SparseLu;
use crate::mesh::{norm, Mesh, Point};
use crate::sparse::max_abs;

/// Natural coefficients of one control pair at one time, sampled on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoefficients {
    /// `a` at every node.
    pub diffusion: Vec<f64>,
    /// `b` at every element centroid.
    pub advection: Vec<Point>,
    /// `|b|_K`: componentwise maximum of `|b|` over the vertices and centroid
    /// of `K`, combined in the Euclidean norm.
    pub advection_bound: Vec<f64>,
    /// `c` at every element centroid.
    pub reaction: Vec<f64>,
    /// Maximum of `|c|` over the vertices and centroid of `K`.
    pub reaction_bound: Vec<f64>,
}

const SAMPLE_POINTS: [[f64; 3]; 4] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
];

impl SampledCoefficients {
    pub fn sample(
        mesh: &Mesh,
        a: &CoefficientField<f64>,
        b: &CoefficientField<Point>,
        c: &CoefficientField<f64>,
    ) -> Self {
        let nt = mesh.n_triangles();
        let mut out = Self {
            diffusion: (0..mesh.n_vertices()).map(|v| a.at_node(mesh, v)).collect(),
            advection: Vec::with_capacity(nt),
            advection_bound: Vec::with_capacity(nt),
            reaction: Vec::with_capacity(nt),
            reaction_bound: Vec::with_capacity(nt),
        };
        for k in 0..nt {
            let mut bmax = [0.0f64; 2];
            let mut cmax = 0.0f64;
            let mut centroid = ([0.0; 2], 0.0);
            for (s, bary) in SAMPLE_POINTS.iter().enumerate() {
                let bv = b.in_element(mesh, k, *bary);
                let cv = c.in_element(mesh, k, *bary);
                bmax[0] = bmax[0].max(bv[0].abs());
                bmax[1] = bmax[1].max(bv[1].abs());
                cmax = cmax.max(cv.abs());
                if s == 3 {
                    centroid = (bv, cv);
                }
            }
            out.advection.push(centroid.0);
            out.advection_bound.push(norm(bmax));
            out.reaction.push(centroid.1);
            out.reaction_bound.push(cmax);
        }
        out
    }
}

/// Smallest nodal diffusion satisfying the element bounds, given `|b|_K`
/// and `||c||_K` per element.
pub fn viscosity_from_bounds(
    mesh: &Mesh,
    advection_bound: &[f64],
    reaction_bound: &[f64],
    theta: f64,
) -> Result<Vec<f64>, StabilizationError> {
    if !(theta > 0.0) {
        return Err(StabilizationError::NotStrictlyAcute { theta });
    }
    let sin = theta.sin();
    let mut nu = vec![0.0; mesh.n_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let numerator = advection_bound[k] + mesh.diameter(k) * reaction_bound[k];
        if numerator == 0.0 {
            continue;
        }
        let g = mesh.hat_gradients(k);
        for a in 0..3 {
            let v = tri[a];
            let grad_hat = norm(g[a]) / mesh.l1_norm(v);
            let value = numerator / (sin * grad_hat * mesh.area(k));
            if value > nu[v] {
                nu[v] = value;
            }
        }
    }
    Ok(nu)
}

/// How the element bound for `ν` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ViscosityRule {
    /// `|b|_K + Δx_K ||c||_K <= ν sin(θ) |∇φ̂_ℓ|_K vol(K)`.
    #[default]
    ElementBound,
    /// The same bound with `vol(K)` on the right replaced by
    /// `vol(K) / ∫_K φ̂_ℓ`, i.e. `ν >= (|b|_K + Δx_K ||c||_K) / (3 sin(θ) |∇φ_ℓ|_K)`.
    /// Still enough for non-positive off-diagonals, and smaller by the factor
    /// `vol(K) / (3 ||φ_ℓ||_{L¹})`.
    Sharp,
}

impl std::str::FromStr for ViscosityRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "element-bound" => Ok(Self::ElementBound),
            "sharp" => Ok(Self::Sharp),
            other => Err(format!("unknown viscosity rule '{other}' (expected element-bound or sharp)")),
        }
    }
}

impl std::fmt::Display for ViscosityRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ElementBound => "element-bound",
            Self::Sharp => "sharp",
        })
    }
}

/// Nodal diffusion for the given rule; see [`viscosity_from_bounds`].
pub fn viscosity_with_rule(
    mesh: &Mesh,
    advection_bound: &[f64],
    reaction_bound: &[f64],
    theta: f64,
    rule: ViscosityRule,
) -> Result<Vec<f64>, StabilizationError> {
    let mut nu = viscosity_from_bounds(mesh, advection_bound, reaction_bound, theta)?;
    if rule == ViscosityRule::Sharp {
        nu.iter_mut().for_each(|v| *v = 0.0);
        let sin = theta.sin();
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let numerator = advection_bound[k] + mesh.diameter(k) * reaction_bound[k];
            if numerator == 0.0 {
                continue;
            }
            for (a, &v) in tri.iter().enumerate() {
                let value = numerator / (3.0 * sin * norm(mesh.hat_gradients(k)[a]));
                if value > nu[v] {
                    nu[v] = value;
                }
            }
        }
    }
    Ok(nu)
}

/// Nodal artificial diffusion `ν` covering the advection `b` and reaction
/// `c` on a mesh with acuteness angle `theta`.
pub fn compute_artificial_viscosity(
    mesh: &Mesh,
    b: &CoefficientField<Point>,
    c: &CoefficientField<f64>,
    theta: f64,
) -> Result<Vec<f64>, StabilizationError> {
    let s = SampledCoefficients::sample(mesh, &CoefficientField::Constant(0.0), b, c);
    viscosity_from_bounds(mesh, &s.advection_bound, &s.reaction_bound, theta)
}

/// How the operator of each control pair is split between the explicit and
/// implicit side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplittingPolicy {
    /// Everything implicit, with the diffusion raised to the artificial
    /// diffusion where needed.
    FullyImplicit,
    /// Advection and reaction explicit together with exactly `ν̄` of
    /// diffusion; the rest of the natural diffusion implicit.
    #[default]
    AdvectionExplicit,
}

impl std::str::FromStr for SplittingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "fully-implicit" => Ok(Self::FullyImplicit),
            "advection-explicit" => Ok(Self::AdvectionExplicit),
            other => Err(format!(
                "unknown splitting policy '{other}' (expected fully-implicit or advection-explicit)"
            )),
        }
    }
}

impl std::fmt::Display for SplittingPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FullyImplicit => "fully-implicit",
            Self::AdvectionExplicit => "advection-explicit",
        })
    }
}

/// Split coefficients of one control pair together with the artificial
/// viscosities and the diffusion added on top of the natural one.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitCoefficients {
    pub coefficients: PairCoefficients,
    pub nu_explicit: Vec<f64>,
    pub nu_implicit: Vec<f64>,
    /// Artificial diffusion beyond the natural one, per node; this is the
    /// consistency gap of the split.
    pub top_up: Vec<f64>,
}

/// Splits the natural coefficients of one control pair.
///
/// `explicit` and `implicit` are the same coefficients sampled at the
/// explicit and implicit time level; `forcing` is per element centroid.
pub fn apply_splitting_policy(
    mesh: &Mesh,
    theta: f64,
    policy: SplittingPolicy,
    rule: ViscosityRule,
    explicit: &SampledCoefficients,
    implicit: &SampledCoefficients,
    forcing: Vec<f64>,
) -> Result<SplitCoefficients, StabilizationError> {
    for s in [explicit, implicit] {
        if let Some((node, &value)) = s.diffusion.iter().enumerate().find(|(_, a)| !(**a >= 0.0)) {
            return Err(StabilizationError::NegativeDiffusion { node, value });
        }
    }
    let nv = mesh.n_vertices();
    match policy {
        SplittingPolicy::FullyImplicit => {
            let nu = viscosity_with_rule(mesh, &implicit.advection_bound, &implicit.reaction_bound, theta, rule)?;
            let diffusion: Vec<f64> = implicit.diffusion.iter().zip(&nu).map(|(a, n)| a.max(*n)).collect();
            let top_up = implicit.diffusion.iter().zip(&nu).map(|(a, n)| (n - a).max(0.0)).collect();
            Ok(SplitCoefficients {
                coefficients: PairCoefficients {
                    explicit: SideCoefficients::zero(mesh),
                    implicit: SideCoefficients {
                        diffusion,
                        advection: implicit.advection.clone(),
                        reaction: implicit.reaction.clone(),
                    },
                    forcing,
                },
                nu_explicit: vec![0.0; nv],
                nu_implicit: nu,
                top_up,
            })
        }
        SplittingPolicy::AdvectionExplicit => {
            let nu = viscosity_with_rule(mesh, &explicit.advection_bound, &explicit.reaction_bound, theta, rule)?;
            let mut implicit_diffusion = Vec::with_capacity(nv);
            let mut top_up = Vec::with_capacity(nv);
            for v in 0..nv {
                let natural_explicit = explicit.diffusion[v].min(nu[v]);
                implicit_diffusion.push((implicit.diffusion[v] - natural_explicit).max(0.0));
                top_up.push(nu[v] - natural_explicit);
            }
            Ok(SplitCoefficients {
                coefficients: PairCoefficients {
                    explicit: SideCoefficients {
                        diffusion: nu.clone(),
                        advection: explicit.advection.clone(),
                        reaction: explicit.reaction.clone(),
                    },
                    implicit: SideCoefficients {
                        diffusion: implicit_diffusion,
                        advection: vec![[0.0; 2]; mesh.n_triangles()],
                        reaction: vec![0.0; mesh.n_triangles()],
                    },
                    forcing,
                },
                nu_explicit: nu,
                nu_implicit: vec![0.0; nv],
                top_up,
            })
        }
    }
}

/// Largest `h` with `hE - Id` entrywise non-positive on interior rows, or
/// `None` if no diagonal entry of any `E` is positive.
pub fn max_stable_timestep(family: &OperatorFamily) -> Result<Option<f64>, StabilizationError> {
    let p = family.pattern();
    let mut h_max: Option<f64> = None;
    for (pair, op) in family.pairs().iter().enumerate() {
        for row in 0..family.n_interior() {
            for pos in p.row_range(row) {
                let col = p.col_indices()[pos];
                let value = op.explicit[pos];
                if col != row && value > 0.0 {
                    return Err(StabilizationError::PositiveOffDiagonal { pair, row, col, value });
                }
            }
            let diag = op.explicit[p.diag_pos(row)];
            if diag > 0.0 {
                let h = 1.0 / diag;
                h_max = Some(h_max.map_or(h, |m| m.min(h)));
            }
        }
    }
    Ok(h_max)
}

/// Entry of `hE - Id` that breaks non-positivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryViolation {
    pub pair: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub h: f64,
    /// Number of positive entries of `hE - Id` on interior rows.
    pub offdiag_violations_e: usize,
    pub worst_violation_e: Option<EntryViolation>,
    pub h_max: Option<f64>,
    /// `hI + Id` is a Z-matrix with positive diagonal and strict diagonal
    /// dominance for every pair.
    pub is_i_mmatrix: bool,
    /// Minimum over pairs and rows of the diagonal minus the absolute
    /// off-diagonal row sum of `hI + Id`.
    pub dominance_margin: f64,
    /// Row of the minimum margin for every pair.
    pub pair_margins: Vec<(usize, f64)>,
    /// Largest `||hE - Id||_∞` over pairs.
    pub explicit_norm: f64,
    /// Largest `||(hI + Id)^{-1} 𝟙||_∞` over pairs, if the inverse check ran.
    pub inverse_norm: Option<f64>,
}

impl MonotonicityReport {
    /// Every monotonicity check holds.
    pub fn passed(&self) -> bool {
        self.offdiag_violations_e == 0
            && self.is_i_mmatrix
            && self.explicit_norm <= 1.0 + 1e-12
            && self.inverse_norm.is_none_or(|n| n <= 1.0 + 1e-10)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "h                      {:.6e}", self.h);
        match self.h_max {
            Some(h) => {
                let _ = writeln!(s, "h_max                  {h:.6e}");
            }
            None => {
                let _ = writeln!(s, "h_max                  unbounded");
            }
        }
        let _ = writeln!(s, "hE-Id violations       {}", self.offdiag_violations_e);
        if let Some(v) = self.worst_violation_e {
            let _ = writeln!(
                s,
                "worst violation        pair {} entry ({}, {}) = {:.3e}",
                v.pair, v.row, v.col, v.value
            );
        }
        let _ = writeln!(s, "hI+Id M-matrix         {}", self.is_i_mmatrix);
        let _ = writeln!(s, "dominance margin       {:.6e}", self.dominance_margin);
        let _ = writeln!(s, "max |hE-Id|_inf        {:.6e}", self.explicit_norm);
        if let Some(n) = self.inverse_norm {
            let _ = writeln!(s, "max |(hI+Id)^-1 1|_inf {n:.6e}");
        }
        let _ = writeln!(s, "passed                 {}", self.passed());
        s
    }

    /// One line per pair: the row of smallest dominance margin.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("pair_id,row,margin\n");
        for (pair, (row, margin)) in self.pair_margins.iter().enumerate() {
            let _ = writeln!(s, "{pair},{row},{margin:.6e}");
        }
        s
    }
}

/// Checks the sign and dominance structure of every pair of `family` at
/// time step `h`.
///
/// With `check_inverse`, `(hI + Id)x = 𝟙` is also solved for every pair.
pub fn verify_monotonicity(family: &OperatorFamily, h: f64, check_inverse: bool) -> MonotonicityReport {
    let p = family.pattern();
    let n = family.dim();
    let mut report = MonotonicityReport {
        h,
        offdiag_violations_e: 0,
        worst_violation_e: None,
        h_max: None,
        is_i_mmatrix: true,
        dominance_margin: f64::INFINITY,
        pair_margins: Vec::with_capacity(family.n_pairs()),
        explicit_norm: 0.0,
        inverse_norm: None,
    };
    let mut h_max: Option<f64> = None;
    for (pair, op) in family.pairs().iter().enumerate() {
        let mut pair_margin = (0, f64::INFINITY);
        for row in 0..n {
            let interior = row < family.n_interior();
            let mut abs_sum_e = 0.0;
            let mut offdiag_i = 0.0;
            let mut diag_i = 0.0;
            for pos in p.row_range(row) {
                let col = p.col_indices()[pos];
                let is_diag = col == row;
                let e = h * op.explicit[pos] - if is_diag { 1.0 } else { 0.0 };
                abs_sum_e += e.abs();
                if interior && e > 0.0 {
                    report.offdiag_violations_e += 1;
                    if report.worst_violation_e.is_none_or(|w| e > w.value) {
                        report.worst_violation_e = Some(EntryViolation { pair, row, col, value: e });
                    }
                }
                if interior && is_diag && op.explicit[pos] > 0.0 {
                    let hm = 1.0 / op.explicit[pos];
                    h_max = Some(h_max.map_or(hm, |m| m.min(hm)));
                }
                let i = h * op.implicit[pos] + if is_diag { 1.0 } else { 0.0 };
                if is_diag {
                    diag_i = i;
                } else {
                    if i > 0.0 {
                        report.is_i_mmatrix = false;
                    }
                    offdiag_i += i.abs();
                }
            }
            report.explicit_norm = report.explicit_norm.max(abs_sum_e);
            let margin = diag_i - offdiag_i;
            if !(diag_i > 0.0 && margin > 0.0) {
                report.is_i_mmatrix = false;
            }
            if margin < pair_margin.1 {
                pair_margin = (row, margin);
            }
        }
        report.dominance_margin = report.dominance_margin.min(pair_margin.1);
        report.pair_margins.push(pair_margin);
    }
    report.h_max = h_max;

    if check_inverse {
        let mut worst = 0.0f64;
        match SparseLu::new(Arc::clone(p)) {
            Ok(lu) => {
                let ones = vec![1.0; n];
                for op in family.pairs() {
                    let mut values = op.implicit.iter().map(|v| h * v).collect::<Vec<_>>();
                    for row in 0..n {
                        values[p.diag_pos(row)] += 1.0;
                    }
                    match lu.solve(&values, &ones, 1e-12) {
                        Ok(x) => worst = worst.max(max_abs(&x)),
                        Err(_) => worst = f64::INFINITY,
                    }
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
        report.inverse_norm = Some(worst);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_operator_pair, Assembler};
    use crate::mesh::generate_triangle_mesh;
    use std::f64::consts::PI;

    #[test]
    fn zero_transport_needs_no_viscosity() {
        let m = generate_triangle_mesh(3);
        let nu =
            compute_artificial_viscosity(&m, &CoefficientField::Constant([0.0, 0.0]), &CoefficientField::Constant(0.0), PI / 6.0)
                .unwrap();
        assert!(nu.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_equilateral_element() {
        let s3 = 3f64.sqrt();
        let m = Mesh::from_parts(vec![[-1.0, 0.0], [1.0, 0.0], [0.0, s3]], vec![[0, 1, 2]], vec![true; 3]).unwrap();
        let nu =
            compute_artificial_viscosity(&m, &CoefficientField::Constant([1.0, 0.0]), &CoefficientField::Constant(0.0), PI / 6.0)
                .unwrap();
        // side 2: area √3, height √3 so |∇φ| = 1/√3, ||φ||_L1 = √3/3
        let area = s3;
        let grad_hat = (1.0 / s3) / (s3 / 3.0);
        let expected = 1.0 / (0.5 * grad_hat * area);
        for v in nu {
            assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        }
    }

    #[test]
    fn viscosity_is_homogeneous_in_b() {
        let m = generate_triangle_mesh(2);
        let b = |s: f64| CoefficientField::function(move |p: Point| [s * p[1], s * (1.0 + p[0])]);
        let zero = CoefficientField::Constant(0.0);
        let one = compute_artificial_viscosity(&m, &b(1.0), &zero, PI / 6.0).unwrap();
        let two = compute_artificial_viscosity(&m, &b(2.0), &zero, PI / 6.0).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn obtuse_mesh_is_rejected() {
        let m = generate_triangle_mesh(1);
        let err = viscosity_from_bounds(&m, &[1.0; 4], &[0.0; 4], 0.0).unwrap_err();
        assert_eq!(err, StabilizationError::NotStrictlyAcute { theta: 0.0 });
    }

    fn sampled(m: &Mesh, a: f64, b: Point) -> SampledCoefficients {
        SampledCoefficients::sample(
            m,
            &CoefficientField::Constant(a),
            &CoefficientField::Constant(b),
            &CoefficientField::Constant(0.0),
        )
    }

    #[test]
    fn large_natural_diffusion_needs_no_top_up() {
        let m = generate_triangle_mesh(4);
        let s = sampled(&m, 1.0, [0.05, 0.0]);
        for policy in [SplittingPolicy::FullyImplicit, SplittingPolicy::AdvectionExplicit] {
            let split = apply_splitting_policy(&m, PI / 6.0, policy, ViscosityRule::ElementBound, &s, &s, vec![0.0; m.n_triangles()]).unwrap();
            assert!(split.top_up.iter().all(|&t| t == 0.0));
            for v in 0..m.n_vertices() {
                let c = &split.coefficients;
                assert!((c.explicit.diffusion[v] + c.implicit.diffusion[v] - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn degenerate_diffusion_is_purely_artificial() {
        let m = generate_triangle_mesh(3);
        let s = sampled(&m, 0.0, [0.3, -0.4]);
        let split =
            apply_splitting_policy(&m, PI / 6.0, SplittingPolicy::AdvectionExplicit, ViscosityRule::ElementBound, &s, &s, vec![0.0; m.n_triangles()]).unwrap();
        assert_eq!(split.coefficients.explicit.diffusion, split.nu_explicit);
        assert_eq!(split.top_up, split.nu_explicit);
        assert!(split.coefficients.implicit.diffusion.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn negative_diffusion_is_rejected() {
        let m = generate_triangle_mesh(2);
        let s = sampled(&m, -1.0, [0.0, 0.0]);
        assert!(matches!(
            apply_splitting_policy(&m, PI / 6.0, SplittingPolicy::FullyImplicit, ViscosityRule::ElementBound, &s, &s, vec![0.0; m.n_triangles()]),
            Err(StabilizationError::NegativeDiffusion { .. })
        ));
    }

    fn family_1x1(e: f64) -> OperatorFamily {
        OperatorFamily::from_dense(1, 1, 1, vec![(vec![vec![e]], vec![vec![1.0]], vec![0.0])]).unwrap()
    }

    #[test]
    fn timestep_bound_is_reciprocal_diagonal() {
        assert_eq!(max_stable_timestep(&family_1x1(0.0)).unwrap(), None);
        assert_eq!(max_stable_timestep(&family_1x1(4.0)).unwrap(), Some(0.25));
        let bad = OperatorFamily::from_dense(
            2,
            1,
            1,
            vec![(vec![vec![1.0, 0.5], vec![0.0, 1.0]], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0; 2])],
        )
        .unwrap();
        assert!(matches!(
            max_stable_timestep(&bad),
            Err(StabilizationError::PositiveOffDiagonal { row: 0, col: 1, .. })
        ));
    }

    fn advective_family(m: &Mesh, theta: f64, policy: SplittingPolicy, rule: ViscosityRule) -> OperatorFamily {
        let asm = Assembler::new(m);
        let pairs = [[1.0, 0.0], [0.0, -1.0], [-0.6, 0.8]]
            .iter()
            .map(|&b| {
                let s = SampledCoefficients::sample(
                    m,
                    &CoefficientField::function(|p: Point| 0.1 * p[0].abs()),
                    &CoefficientField::Constant(b),
                    &CoefficientField::Constant(0.5),
                );
                let split = apply_splitting_policy(m, theta, policy, rule, &s, &s, vec![0.0; m.n_triangles()]).unwrap();
                assemble_operator_pair(&asm, m, &split.coefficients, &vec![0.0; m.n_vertices()]).unwrap()
            })
            .collect();
        OperatorFamily::new(asm.pattern().clone(), m.n_interior(), 3, 1, pairs).unwrap()
    }

    #[test]
    fn split_operators_are_monotone_below_h_max() {
        let meshes = [generate_triangle_mesh(4), crate::mesh::generate_annulus_mesh(0.5, 2.0, 8, 32).unwrap()];
        for m in &meshes {
            let theta = crate::mesh::check_strict_acuteness(m).theta;
            for rule in [ViscosityRule::ElementBound, ViscosityRule::Sharp] {
                let fam = advective_family(m, theta, SplittingPolicy::AdvectionExplicit, rule);
                let h_max = max_stable_timestep(&fam).unwrap().unwrap();
                let ok = verify_monotonicity(&fam, h_max, true);
                assert!(ok.passed(), "{rule}: {}", ok.to_text());
                let bad = verify_monotonicity(&fam, 1.5 * h_max, false);
                assert!(bad.offdiag_violations_e > 0);
                assert!(bad.worst_violation_e.is_some());

                let implicit = advective_family(m, theta, SplittingPolicy::FullyImplicit, rule);
                assert_eq!(max_stable_timestep(&implicit).unwrap(), None);
                assert!(verify_monotonicity(&implicit, 10.0, true).passed());
                assert_eq!(verify_monotonicity(&implicit, 10.0, false).to_csv().lines().count(), 4);
            }
        }
    }

    #[test]
    fn sharp_rule_scales_the_element_bound() {
        let m = generate_triangle_mesh(3);
        let s = sampled(&m, 0.0, [1.0, 0.0]);
        let loose = viscosity_with_rule(&m, &s.advection_bound, &s.reaction_bound, PI / 6.0, ViscosityRule::ElementBound).unwrap();
        let sharp = viscosity_with_rule(&m, &s.advection_bound, &s.reaction_bound, PI / 6.0, ViscosityRule::Sharp).unwrap();
        // interior nodes have six congruent elements: ||φ||_1 = 2 vol(K)
        for v in 0..m.n_interior() {
            assert!((loose[v] / sharp[v] - 6.0).abs() < 1e-12);
        }
    }

    fn dense_inverse_3x3(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
        let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
        if det.abs() < 1e-14 {
            return None;
        }
        let mut inv = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = ((j + 1) % 3, (j + 2) % 3);
                let (c0, c1) = ((i + 1) % 3, (i + 2) % 3);
                inv[i][j] = (a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0]) / det;
            }
        }
        Some(inv)
    }

    #[test]
    fn weakly_dominant_z_matrices_become_m_matrices() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let mut i = [[0.0; 3]; 3];
            for (r, row) in i.iter_mut().enumerate() {
                let mut sum = 0.0;
                for (c, v) in row.iter_mut().enumerate() {
                    if c != r {
                        *v = -rng.random_range(0.0..2.0);
                        sum -= *v;
                    }
                }
                row[r] = sum;
            }
            let h = rng.random_range(0.1..2.0);
            let fam = OperatorFamily::from_dense(
                3,
                1,
                1,
                vec![(vec![vec![0.0; 3]; 3], i.iter().map(|r| r.to_vec()).collect(), vec![0.0; 3])],
            )
            .unwrap();
            let report = verify_monotonicity(&fam, h, true);
            let mut shifted = i;
            for (r, row) in shifted.iter_mut().enumerate() {
                for v in row.iter_mut() {
                    *v *= h;
                }
                row[r] += 1.0;
            }
            let inv = dense_inverse_3x3(shifted).unwrap();
            let inverse_positive = inv.iter().flatten().all(|&v| v >= -1e-14);
            assert!(report.is_i_mmatrix);
            assert!(inverse_positive);
            assert!(report.inverse_norm.unwrap() <= 1.0 + 1e-10);
        }
    }
}
