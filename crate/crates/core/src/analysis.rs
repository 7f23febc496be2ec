//! Error norms, convergence studies and the consistency probe.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::SolverError;
use crate::mesh::{generate_triangle_mesh, Mesh, Point};
use crate::problems::{Domain, IsaacsProblem};
use crate::projection::ProjectionOperator;
use crate::solver::{solve_isaacs, Discretization, SchemeConfig};

/// Errors of a discrete function against an exact one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// Nodal maximum error.
    pub inf: f64,
    pub l2: f64,
    /// Full `H¹` norm (`L²` part plus seminorm).
    pub h1: f64,
}

/// Nodal `L∞` error and `L²`/`H¹` errors with the edge-midpoint rule.
pub fn compute_errors(
    mesh: &Mesh,
    coefficients: &[f64],
    exact: impl Fn(Point) -> f64,
    gradient: impl Fn(Point) -> Point,
) -> ErrorNorms {
    let inf = mesh
        .vertices()
        .iter()
        .zip(coefficients)
        .map(|(&x, &v)| (v - exact(x)).abs())
        .fold(0.0, f64::max);
    // barycentric coordinates in the order of `Mesh::edge_midpoints`
    let mids_bary = [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let (mut l2, mut semi) = (0.0, 0.0);
    for k in 0..mesh.n_triangles() {
        let area = mesh.area(k);
        let gu = mesh.gradient_in(k, coefficients);
        let mids = mesh.edge_midpoints(k);
        let (mut el, mut es) = (0.0, 0.0);
        for (m, bary) in mids.iter().zip(mids_bary) {
            let d = mesh.interpolate_in(k, coefficients, bary) - exact(*m);
            let g = gradient(*m);
            el += d * d;
            es += (gu[0] - g[0]).powi(2) + (gu[1] - g[1]).powi(2);
        }
        l2 += el * area / 3.0;
        semi += es * area / 3.0;
    }
    ErrorNorms {
        inf,
        l2: l2.sqrt(),
        h1: (l2 + semi).sqrt(),
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub dx: f64,
    pub h: f64,
    pub dofs: usize,
    pub err_inf: f64,
    pub err_l2: f64,
    pub err_h1: f64,
    pub rate_inf: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    pub runtime_seconds: f64,
    /// Howard steps that hit an iteration cap.
    pub non_converged_steps: usize,
}

pub const CONVERGENCE_HEADER: &str = "dx,h,dofs,err_inf,rate_inf,err_l2,rate_l2,err_h1,rate_h1,runtime_s";

fn sci(v: f64) -> String {
    format!("{v:.3e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(sci).unwrap_or_default()
}

/// Convergence table as CSV with four significant digits.
pub fn records_to_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::from(CONVERGENCE_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            sci(r.dx),
            sci(r.h),
            r.dofs,
            sci(r.err_inf),
            opt(r.rate_inf),
            sci(r.err_l2),
            opt(r.rate_l2),
            sci(r.err_h1),
            opt(r.rate_h1),
            sci(r.runtime_seconds)
        );
    }
    out
}

/// `log₂(previous / current)`.
pub fn rate(previous: f64, current: f64) -> f64 {
    (previous / current).log2()
}

/// Fills in the rates of consecutive rows.
pub fn fill_rates(records: &mut [ErrorRecord]) {
    for i in 1..records.len() {
        let (p, c) = (records[i - 1].clone(), &mut records[i]);
        c.rate_inf = Some(rate(p.err_inf, c.err_inf));
        c.rate_l2 = Some(rate(p.err_l2, c.err_l2));
        c.rate_h1 = Some(rate(p.err_h1, c.err_h1));
    }
}

/// Result of a convergence study; a failed level stops the study and keeps
/// the rows computed before it.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub records: Vec<ErrorRecord>,
    pub failure: Option<(u32, SolverError)>,
}

/// Solves `problem` on triangle meshes of the given refinement levels and
/// tabulates the errors at `t = 0`.
pub fn convergence_study(problem: &IsaacsProblem, levels: &[u32], config: &SchemeConfig) -> Result<ConvergenceStudy, SolverError> {
    let exact = problem
        .exact
        .as_ref()
        .ok_or_else(|| SolverError::Config(format!("problem '{}' has no exact solution", problem.name)))?;
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SolverError::Config("levels must be strictly increasing".into()));
    }
    let config = SchemeConfig {
        keep_all_steps: false,
        ..config.clone()
    };
    let mut records = Vec::new();
    for &level in levels {
        let mut p = problem.clone();
        p.domain = Domain::Triangle { level };
        let mesh = generate_triangle_mesh(level);
        let start = Instant::now();
        let series = match solve_isaacs(&p, &mesh, &config) {
            Ok(s) => s,
            Err(e) => {
                fill_rates(&mut records);
                return Ok(ConvergenceStudy {
                    records,
                    failure: Some((level, e)),
                });
            }
        };
        let runtime = start.elapsed().as_secs_f64();
        let e = compute_errors(&mesh, series.initial(), |x| (exact.value)(x, 0.0), |x| (exact.gradient)(x, 0.0));
        records.push(ErrorRecord {
            dx: mesh.mesh_size(),
            h: series.h,
            dofs: mesh.n_vertices(),
            err_inf: e.inf,
            err_l2: e.l2,
            err_h1: e.h1,
            rate_inf: None,
            rate_l2: None,
            rate_h1: None,
            runtime_seconds: runtime,
            non_converged_steps: series.non_converged_steps(),
        });
    }
    fill_rates(&mut records);
    Ok(ConvergenceStudy { records, failure: None })
}

/// Smooth test function with the derivatives the probe needs.
pub struct ProbeFunction<'a> {
    pub value: &'a (dyn Fn(Point, f64) -> f64 + Sync),
    pub gradient: &'a (dyn Fn(Point, f64) -> Point + Sync),
}

/// One level of the consistency probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub level: u32,
    pub node: usize,
    pub node_position: Point,
    pub time: f64,
    pub h: f64,
    /// `F P ψ / h` at the node.
    pub scheme_value: f64,
    /// `-∂_t ψ + H(ψ)` at the node, continuous inf-sup.
    pub pde_value: f64,
    pub gap: f64,
}

/// Compares the scheme applied to the projected test function with the
/// continuous residual at the interior node nearest `point` and the step
/// nearest `time`, on each level. `pde_value(x, t)` evaluates the
/// continuous residual of `ψ`.
pub fn consistency_probe(
    problem: &IsaacsProblem,
    psi: &ProbeFunction,
    pde_value: impl Fn(Point, f64) -> f64,
    point: Point,
    time: f64,
    levels: &[u32],
    config: &SchemeConfig,
) -> Result<Vec<ProbeSample>, SolverError> {
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        let mesh = generate_triangle_mesh(level);
        let node = mesh
            .nearest_node(point, true)
            .ok_or_else(|| SolverError::Config(format!("level {level} has no interior nodes")))?;
        let disc = Discretization::new(&mesh, problem, config)?;
        let big_t = problem.final_time;
        let h = match config.h {
            Some(h) => h,
            None => {
                let n = match disc.sampled_max_timestep()? {
                    Some(h_max) => (big_t / h_max * (1.0 + 1e-12)).ceil(),
                    None => (big_t / mesh.mesh_size()).ceil(),
                };
                big_t / n.max(1.0)
            }
        };
        let n_steps = (big_t / h).round() as usize;
        let k = ((time / h).round() as usize).min(n_steps.saturating_sub(1));
        let (t_now, t_next) = (k as f64 * h, (k + 1) as f64 * h);
        let proj = ProjectionOperator::new(&mesh)?;
        let w_now = proj.project(&mesh, |x| (psi.value)(x, t_now), |x| (psi.gradient)(x, t_now))?;
        let w_next = proj.project(&mesh, |x| (psi.value)(x, t_next), |x| (psi.gradient)(x, t_next))?;
        let load = disc.boundary_load(t_now, t_next, h);
        let family = disc.family(t_now, t_next, &load, Some(&w_next))?;
        let scheme_value = (0..family.n_beta())
            .map(|b| {
                (0..family.n_alpha())
                    .map(|a| family.psi_row(family.pair_index(a, b), node, &w_now, &w_next, h))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
            / h;
        let y = mesh.vertex(node);
        let pde = pde_value(y, t_now);
        out.push(ProbeSample {
            level,
            node,
            node_position: y,
            time: t_now,
            h,
            scheme_value,
            pde_value: pde,
            gap: (scheme_value - pde).abs(),
        });
    }
    Ok(out)
}

/// Probe of a problem's own exact solution.
pub fn consistency_probe_exact(
    problem: &IsaacsProblem,
    point: Point,
    time: f64,
    levels: &[u32],
    config: &SchemeConfig,
) -> Result<Vec<ProbeSample>, SolverError> {
    let exact = problem
        .exact
        .clone()
        .ok_or_else(|| SolverError::Config(format!("problem '{}' has no exact solution", problem.name)))?;
    let value = |x: Point, t: f64| (exact.value)(x, t);
    let gradient = |x: Point, t: f64| (exact.gradient)(x, t);
    consistency_probe(
        problem,
        &ProbeFunction {
            value: &value,
            gradient: &gradient,
        },
        |x, t| problem.pde_residual(x, t).expect("exact solution attached"),
        point,
        time,
        levels,
        config,
    )
}
