//! Problem definitions: coefficients, control grids, boundary and terminal
//! data.
//!
//! A problem is posed in the form
//!
//! ```text
//! -∂_t v + inf_β sup_α ( -a Δv - b·∇v + c v - f ) = 0   in (0, T) × Ω
//! v = g on (0, T) × ∂Ω,   v(T, ·) = v_T
//! ```
//!
//! with scalar controls `α` and `β` taken from finite grids.

mod config;
mod expr;
mod experiment1;
mod tag_chase;

use std::path::PathBuf;
use std::sync::Arc;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use config::{load_problem_config, ProblemConfig};
pub use experiment1::{experiment1, Experiment1};
pub use expr::Expr;
pub use tag_chase::{tag_chase, TagChase};

use crate::error::{MeshError, ProblemError};
use crate::mesh::{generate_annulus_mesh, generate_triangle_mesh, load_mesh, Mesh, Point};

/// `(x, t, α, β) -> scalar`
pub type ScalarFn = Arc<dyn Fn(Point, f64, f64, f64) -> f64 + Send + Sync>;
/// `(x, t, α, β) -> vector`
pub type VectorFn = Arc<dyn Fn(Point, f64, f64, f64) -> Point + Send + Sync>;
/// `(x, t) -> scalar`
pub type SpaceTimeFn = Arc<dyn Fn(Point, f64) -> f64 + Send + Sync>;
/// `(x, t) -> vector`
pub type SpaceTimeVectorFn = Arc<dyn Fn(Point, f64) -> Point + Send + Sync>;

/// Spatial domain of a problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// The equilateral triangle, refined `level` times.
    Triangle { level: u32 },
    Annulus {
        r: f64,
        big_r: f64,
        n_radial: usize,
        n_angular: usize,
    },
    MeshFile(PathBuf),
}

impl Domain {
    pub fn build_mesh(&self) -> Result<Mesh, MeshError> {
        match self {
            Self::Triangle { level } => Ok(generate_triangle_mesh(*level)),
            Self::Annulus {
                r,
                big_r,
                n_radial,
                n_angular,
            } => generate_annulus_mesh(*r, *big_r, *n_radial, *n_angular),
            Self::MeshFile(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| MeshError::Parse {
                    line: 0,
                    message: format!("{}: {e}", path.display()),
                })?;
                load_mesh(&text)
            }
        }
    }

    /// Human-readable description, used in manifests.
    pub fn describe(&self) -> String {
        match self {
            Self::Triangle { level } => format!("triangle level={level}"),
            Self::Annulus {
                r,
                big_r,
                n_radial,
                n_angular,
            } => format!("annulus r={r} R={big_r} n_radial={n_radial} n_angular={n_angular}"),
            Self::MeshFile(p) => format!("file {}", p.display()),
        }
    }
}

/// Shape of a compact control set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlRange {
    /// `[lower, upper]`; grids include both endpoints.
    Interval { lower: f64, upper: f64 },
    /// A circle of angles starting at `start`; grids are uniform and do not
    /// repeat the start point.
    Periodic { start: f64, period: f64 },
}

/// A finite grid of scalar controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSet {
    range: ControlRange,
    values: Vec<f64>,
}

impl ControlSet {
    /// `count` uniform samples of `[lower, upper]` including the endpoints
    /// (`lower` alone if `count == 1`).
    pub fn interval(lower: f64, upper: f64, count: usize) -> Self {
        assert!(count >= 1 && lower <= upper, "invalid control interval");
        let values = if count == 1 {
            vec![lower]
        } else {
            (0..count)
                .map(|k| lower + (upper - lower) * k as f64 / (count - 1) as f64)
                .collect()
        };
        Self {
            range: ControlRange::Interval { lower, upper },
            values,
        }
    }

    /// `start + k·period/count` for `k = 0..count`.
    pub fn periodic(start: f64, period: f64, count: usize) -> Self {
        assert!(count >= 1 && period > 0.0, "invalid periodic control set");
        Self {
            range: ControlRange::Periodic { start, period },
            values: (0..count).map(|k| start + period * k as f64 / count as f64).collect(),
        }
    }

    /// Same range sampled with `count` points.
    pub fn resampled(&self, count: usize) -> Self {
        match self.range {
            ControlRange::Interval { lower, upper } => Self::interval(lower, upper, count),
            ControlRange::Periodic { start, period } => Self::periodic(start, period, count),
        }
    }

    pub fn range(&self) -> ControlRange {
        self.range
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.values.iter().map(|v| format!("{v:.6}")).collect()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.range {
            ControlRange::Interval { lower, upper } if upper > lower => rng.random_range(lower..=upper),
            ControlRange::Interval { lower, .. } => lower,
            ControlRange::Periodic { start, period } => start + rng.random_range(0.0..period),
        }
    }

    /// Maximizes `f` over the continuous range by a dense scan followed by
    /// golden-section refinement around the best sample.
    pub fn continuous_max(&self, f: impl Fn(f64) -> f64) -> f64 {
        const SCAN: usize = 96;
        let (lo, hi, periodic) = match self.range {
            ControlRange::Interval { lower, upper } => (lower, upper, false),
            ControlRange::Periodic { start, period } => (start, start + period, true),
        };
        if hi <= lo {
            return f(lo);
        }
        let step = (hi - lo) / SCAN as f64;
        let mut best = (f64::NEG_INFINITY, lo);
        for k in 0..=SCAN {
            let x = lo + step * k as f64;
            let v = f(x);
            if v > best.0 {
                best = (v, x);
            }
        }
        let (mut a, mut b) = (best.1 - step, best.1 + step);
        if !periodic {
            a = a.max(lo);
            b = b.min(hi);
        }
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..80 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(d);
            }
        }
        best.0.max(fc).max(fd)
    }

    pub fn continuous_min(&self, f: impl Fn(f64) -> f64) -> f64 {
        -self.continuous_max(|x| -f(x))
    }
}

/// Exact solution with the derivatives needed for the continuous residual.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: SpaceTimeFn,
    pub gradient: SpaceTimeVectorFn,
    pub time_derivative: SpaceTimeFn,
    pub laplacian: SpaceTimeFn,
}

/// Advection of the form `b = s(x, t)·(cos α, sin α)`, which admits the
/// closed-form maximizer over the circle of directions.
#[derive(Clone)]
pub struct DirectionalAdvection {
    pub speed: SpaceTimeFn,
}

/// An isotropic Isaacs problem.
#[derive(Clone)]
pub struct IsaacsProblem {
    pub name: String,
    pub domain: Domain,
    pub alphas: ControlSet,
    pub betas: ControlSet,
    pub diffusion: ScalarFn,
    pub advection: VectorFn,
    pub reaction: ScalarFn,
    pub forcing: ScalarFn,
    /// Dirichlet data `g(x, t)`.
    pub boundary: SpaceTimeFn,
    pub terminal: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    pub terminal_gradient: Arc<dyn Fn(Point) -> Point + Send + Sync>,
    pub final_time: f64,
    /// Whether any coefficient or datum depends on `t`.
    pub time_dependent: bool,
    pub exact: Option<ExactSolution>,
    pub directional_advection: Option<DirectionalAdvection>,
    /// Range every discrete solution must stay in, when the comparison
    /// principle gives one (`f = c = 0`).
    pub value_bounds: Option<(f64, f64)>,
}

impl std::fmt::Debug for IsaacsProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IsaacsProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("alphas", &self.alphas.len())
            .field("betas", &self.betas.len())
            .field("final_time", &self.final_time)
            .finish_non_exhaustive()
    }
}

impl IsaacsProblem {
    /// `-a Δv - b·∇v + c v - f` for one control pair.
    pub fn operator_value(&self, x: Point, t: f64, alpha: f64, beta: f64, v: f64, grad: Point, lap: f64) -> f64 {
        let b = (self.advection)(x, t, alpha, beta);
        -(self.diffusion)(x, t, alpha, beta) * lap - (b[0] * grad[0] + b[1] * grad[1])
            + (self.reaction)(x, t, alpha, beta) * v
            - (self.forcing)(x, t, alpha, beta)
    }

    /// `inf_β sup_α` of [`operator_value`](Self::operator_value) over the
    /// continuous control ranges.
    pub fn hamiltonian(&self, x: Point, t: f64, v: f64, grad: Point, lap: f64) -> f64 {
        self.betas.continuous_min(|beta| {
            self.alphas
                .continuous_max(|alpha| self.operator_value(x, t, alpha, beta, v, grad, lap))
        })
    }

    /// `-∂_t v + H(x, t, v, ∇v, Δv)` for the attached exact solution.
    pub fn pde_residual(&self, x: Point, t: f64) -> Option<f64> {
        let e = self.exact.as_ref()?;
        let h = self.hamiltonian(x, t, (e.value)(x, t), (e.gradient)(x, t), (e.laplacian)(x, t));
        Some(-(e.time_derivative)(x, t) + h)
    }

    pub fn with_control_counts(mut self, n_alpha: usize, n_beta: usize) -> Self {
        self.alphas = self.alphas.resampled(n_alpha);
        self.betas = self.betas.resampled(n_beta);
        self
    }
}

/// Looks up a built-in problem by name (`exp1` or `tag-chase`).
pub fn builtin(name: &str) -> Result<IsaacsProblem, ProblemError> {
    match name {
        "exp1" | "experiment1" => Ok(experiment1()),
        "tag-chase" | "tag_chase" => Ok(tag_chase()),
        other => Err(ProblemError::Unknown(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NegativeDiffusion,
    NegativeReaction,
    NonFinite,
}

/// A sampled point where a coefficient breaks the standing assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub point: Point,
    pub time: f64,
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
}

/// Boundary node where the terminal data disagrees with `g(·, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMismatch {
    pub node: usize,
    pub point: Point,
    pub terminal: f64,
    pub boundary: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
    pub boundary_mismatches: Vec<BoundaryMismatch>,
}

impl ValidationReport {
    /// No coefficient violations; boundary mismatches are only warnings.
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "samples: {}", self.samples);
        let _ = writeln!(s, "coefficient violations: {}", self.violations.len());
        for v in self.violations.iter().take(10) {
            let _ = writeln!(
                s,
                "  {:?} = {:.6e} at x = ({:.6}, {:.6}), t = {:.6}, alpha = {:.6}, beta = {:.6}",
                v.kind, v.value, v.point[0], v.point[1], v.time, v.alpha, v.beta
            );
        }
        let _ = writeln!(s, "terminal/boundary mismatches: {}", self.boundary_mismatches.len());
        if let Some(m) = self.boundary_mismatches.first() {
            let _ = writeln!(
                s,
                "  e.g. node {} at ({:.6}, {:.6}): v_T = {:.6}, g = {:.6}",
                m.node, m.point[0], m.point[1], m.terminal, m.boundary
            );
        }
        s
    }
}

/// Samples the coefficients at `samples` random space-time-control points of
/// `mesh` and compares terminal and boundary data on boundary nodes.
pub fn validate_problem(problem: &IsaacsProblem, mesh: &Mesh, samples: usize, seed: u64) -> ValidationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    for _ in 0..samples {
        let k = rng.random_range(0..mesh.n_triangles());
        let (mut l0, mut l1) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        if l0 + l1 > 1.0 {
            (l0, l1) = (1.0 - l0, 1.0 - l1);
        }
        let tri = mesh.triangles()[k];
        let bary = [l0, l1, 1.0 - l0 - l1];
        let x = [0, 1].map(|d| (0..3).map(|a| bary[a] * mesh.vertex(tri[a])[d]).sum::<f64>());
        let t = rng.random_range(0.0..=problem.final_time);
        let alpha = problem.alphas.sample(&mut rng);
        let beta = problem.betas.sample(&mut rng);
        let a = (problem.diffusion)(x, t, alpha, beta);
        let b = (problem.advection)(x, t, alpha, beta);
        let c = (problem.reaction)(x, t, alpha, beta);
        let f = (problem.forcing)(x, t, alpha, beta);
        let mut push = |kind, value| {
            violations.push(Violation {
                kind,
                point: x,
                time: t,
                alpha,
                beta,
                value,
            })
        };
        if ![a, b[0], b[1], c, f].iter().all(|v| v.is_finite()) {
            push(ViolationKind::NonFinite, f64::NAN);
        } else if a < 0.0 {
            push(ViolationKind::NegativeDiffusion, a);
        } else if c < 0.0 {
            push(ViolationKind::NegativeReaction, c);
        }
    }
    let boundary_mismatches = (mesh.n_interior()..mesh.n_vertices())
        .filter_map(|v| {
            let p = mesh.vertex(v);
            let terminal = (problem.terminal)(p);
            let boundary = (problem.boundary)(p, problem.final_time);
            ((terminal - boundary).abs() > 1e-9).then_some(BoundaryMismatch {
                node: v,
                point: p,
                terminal,
                boundary,
            })
        })
        .collect();
    ValidationReport {
        samples,
        violations,
        boundary_mismatches,
    }
}
