//! Acceptance suite: one line per criterion.
//!
//! Criteria listed in `KNOWN_RED` are reported as FAIL but do not fail the
//! run; every other failure does.

mod common;

use std::time::Instant;

use common::TwoNodeSystem;
use isaacs_fem::analysis::{consistency_probe_exact, convergence_study, ErrorRecord};
use isaacs_fem::linalg::SparseLu;
use isaacs_fem::mesh::{generate_triangle_mesh, Mesh, Point};
use isaacs_fem::problems::{load_problem_config, Experiment1, IsaacsProblem, TagChase};
use isaacs_fem::projection::{galerkin_residual, ProjectionOperator};
use isaacs_fem::solver::{howard_solve_step, solve_isaacs, Discretization, HowardConfig, SchemeConfig};
use isaacs_fem::stabilization::{verify_monotonicity, ViscosityRule};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that cannot be met; see "Known limitations" in the README.
const KNOWN_RED: &[u32] = &[1];

/// Target errors of `exp1` at t = 0: `(dx, L∞, L², H¹)`.
const REFERENCE_TABLE: [(f64, f64, f64, f64); 4] = [
    (0.4330, 1.364e-2, 7.062e-3, 6.792e-2),
    (0.2165, 1.040e-2, 3.695e-3, 3.737e-2),
    (0.1083, 5.715e-3, 2.361e-3, 1.899e-2),
    (0.0541, 2.838e-3, 1.266e-3, 9.391e-3),
];

struct Outcome {
    passed: bool,
    detail: String,
    notes: Vec<String>,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }
}

/// Worst `max |v| / bound` seen by any solve in this run.
static STABILITY: std::sync::Mutex<(f64, usize)> = std::sync::Mutex::new((0.0, 0));

fn record_stability(ratio: f64) {
    let mut s = STABILITY.lock().unwrap();
    s.0 = s.0.max(ratio);
    s.1 += 1;
}

fn exp1(level: u32) -> IsaacsProblem {
    Experiment1 {
        level,
        ..Default::default()
    }
    .build()
}

fn table_lines(records: &[ErrorRecord]) -> Vec<String> {
    records
        .iter()
        .map(|r| {
            let rate = |x: Option<f64>| x.map_or("     ".to_string(), |v| format!("{v:5.2}"));
            format!(
                "dx {:.4}  h {:.4}  inf {:.3e} ({})  l2 {:.3e} ({})  h1 {:.3e} ({})",
                r.dx,
                r.h,
                r.err_inf,
                rate(r.rate_inf),
                r.err_l2,
                rate(r.rate_l2),
                r.err_h1,
                rate(r.rate_h1)
            )
        })
        .collect()
}

/// Errors within a factor 2 of the reference table and every rate in
/// `[0.6, 1.3]`.
fn convergence() -> Outcome {
    let mut passed = true;
    let mut notes = Vec::new();
    let mut summary = Vec::new();
    for viscosity in [ViscosityRule::ElementBound, ViscosityRule::Sharp] {
        let config = SchemeConfig {
            viscosity,
            ..Default::default()
        };
        let study = match convergence_study(&exp1(3), &[3, 4, 5, 6], &config) {
            Ok(s) => s,
            Err(e) => return Outcome::new(false, format!("{viscosity}: {e}")),
        };
        if let Some((level, e)) = &study.failure {
            return Outcome::new(false, format!("{viscosity}: level {level}: {e}"));
        }
        let mut worst_factor = 1.0f64;
        let mut rates_ok = true;
        for (r, reference) in study.records.iter().zip(REFERENCE_TABLE) {
            for (got, want) in [(r.err_inf, reference.1), (r.err_l2, reference.2), (r.err_h1, reference.3)] {
                worst_factor = worst_factor.max((got / want).max(want / got));
            }
            for rate in [r.rate_inf, r.rate_l2, r.rate_h1].into_iter().flatten() {
                rates_ok &= (0.6..=1.3).contains(&rate);
            }
        }
        let ok = worst_factor <= 2.0 && rates_ok;
        passed &= ok;
        summary.push(format!(
            "{viscosity}: worst factor {worst_factor:.2}, rates {}",
            if rates_ok { "in range" } else { "out of range" }
        ));
        notes.push(format!("{viscosity} viscosity:"));
        notes.extend(table_lines(&study.records));
    }
    notes.push("reference:".into());
    for r in REFERENCE_TABLE {
        notes.push(format!("dx {:.4}  inf {:.3e}  l2 {:.3e}  h1 {:.3e}", r.0, r.1, r.2, r.3));
    }
    Outcome {
        passed,
        detail: summary.join("; "),
        notes,
    }
}

fn random_point_in_triangle(rng: &mut ChaCha8Rng, mesh: &Mesh) -> Point {
    let k = rng.random_range(0..mesh.n_triangles());
    let t = mesh.triangles()[k];
    let (mut a, mut b) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    if a + b > 1.0 {
        (a, b) = (1.0 - a, 1.0 - b);
    }
    let [p, q, r] = t.map(|v| mesh.vertex(v));
    [
        p[0] + a * (q[0] - p[0]) + b * (r[0] - p[0]),
        p[1] + a * (q[1] - p[1]) + b * (r[1] - p[1]),
    ]
}

fn pde_residual() -> Outcome {
    let problem = exp1(3);
    let mesh = generate_triangle_mesh(3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = random_point_in_triangle(&mut rng, &mesh);
        let t = rng.random_range(0.0..problem.final_time);
        worst = worst.max(problem.pde_residual(x, t).unwrap().abs());
    }
    Outcome::new(worst < 1e-6, format!("max |residual| {worst:.2e} at 100 points"))
}

fn monotonicity() -> Outcome {
    let mut cases: Vec<(String, IsaacsProblem, Mesh)> = (0..=3)
        .map(|level| (format!("exp1 level {level}"), exp1(level), generate_triangle_mesh(level)))
        .collect();
    let tag = TagChase::default().build();
    let annulus = tag.domain.build_mesh().unwrap();
    cases.push(("tag chase annulus".into(), tag, annulus));
    let mut passed = true;
    let mut notes = Vec::new();
    for (name, problem, mesh) in &cases {
        let disc = Discretization::new(mesh, problem, &SchemeConfig::default()).unwrap();
        let h = disc.sampled_max_timestep().unwrap().unwrap_or(problem.final_time);
        let last = (problem.final_time - h).max(0.0);
        let mut times = if problem.time_dependent { vec![0.0, 0.5 * last, last] } else { vec![0.0] };
        times.dedup();
        for t in times {
            let load = disc.boundary_load(t, t + h, h);
            let family = disc.family(t, t + h, &load, None).unwrap();
            let report = verify_monotonicity(&family, h, true);
            passed &= report.passed();
            notes.push(format!(
                "{name} t={t:.3} h={h:.4}: positive entries {}, Z-matrix {}, |hE-Id| {:.6}, |(hI+Id)^-1 1| {:.12}",
                report.offdiag_violations_e,
                report.is_i_mmatrix,
                report.explicit_norm,
                report.inverse_norm.unwrap_or(f64::NAN)
            ));
        }
    }
    Outcome {
        passed,
        detail: format!("{} meshes checked at the largest monotone step", cases.len()),
        notes,
    }
}

fn howard_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    let n = 200;
    for _ in 0..n {
        let sys = TwoNodeSystem::random(&mut rng);
        let family = sys.family();
        let lu = SparseLu::new(family.pattern().clone()).unwrap();
        let sol = howard_solve_step(&family, &sys.w, sys.h, &HowardConfig::default(), None, &lu).unwrap();
        unconverged += usize::from(!sol.stats.converged);
        let oracle = sys.brute_force();
        for r in 0..2 {
            worst = worst.max((sol.u[r] - oracle[r]).abs());
        }
    }
    Outcome::new(
        worst < 1e-9 && unconverged == 0,
        format!("{n} systems, max deviation {worst:.2e}, {unconverged} not converged"),
    )
}

fn constant_problem(value: f64) -> IsaacsProblem {
    let text = format!(
        r#"
name = "constant"
[domain]
kind = "triangle"
level = 3
[controls.alpha]
kind = "periodic"
start = 0.0
period = 6.283185307179586
count = 8
[controls.beta]
kind = "interval"
lower = 0.5
upper = 1.0
count = 3
[coefficients]
a = "beta * (x * x + y * y)"
b_x = "cos(alpha)"
b_y = "sin(alpha)"
c = "beta"
f = "beta * {value}"
g = "{value}"
terminal = "{value}"
"#
    );
    load_problem_config(&text, std::path::Path::new(".")).unwrap()
}

fn bounds_preserved() -> Outcome {
    let tag = TagChase::default().build();
    let mesh = tag.domain.build_mesh().unwrap();
    let series = match solve_isaacs(&tag, &mesh, &SchemeConfig::default()) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("tag chase: {e}")),
    };
    record_stability(series.stability.worst_ratio);
    let (lo, hi) = series
        .values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let in_range = lo >= -1e-9 && hi <= 1.0 + 1e-9;

    let value = 0.7;
    let problem = constant_problem(value);
    let cmesh = generate_triangle_mesh(3);
    let constant = solve_isaacs(&problem, &cmesh, &SchemeConfig::default()).unwrap();
    record_stability(constant.stability.worst_ratio);
    let drift = constant.values.iter().flatten().fold(0.0f64, |m, v| m.max((v - value).abs()));
    Outcome::new(
        in_range && drift < 1e-10,
        format!(
            "tag chase range [{lo:.3e}, {hi:.12}] over {} steps; constant drift {drift:.1e}",
            series.n_steps
        ),
    )
}

fn stability_bound() -> Outcome {
    let mut passed = true;
    for level in 2..=5 {
        match solve_isaacs(&exp1(level), &generate_triangle_mesh(level), &SchemeConfig::default()) {
            Ok(s) => record_stability(s.stability.worst_ratio),
            Err(e) => {
                passed = false;
                eprintln!("level {level}: {e}");
            }
        }
    }
    let (worst, runs) = *STABILITY.lock().unwrap();
    Outcome::new(
        passed && worst <= 1.0,
        format!("{runs} runs, worst max|v|/bound {worst:.4}"),
    )
}

fn projection() -> Outcome {
    let mut worst = [0.0f64; 3];
    for level in 0..=3 {
        let mesh = generate_triangle_mesh(level);
        let p = ProjectionOperator::new(&mesh).unwrap();
        let affine = |x: Point| 0.3 - 1.7 * x[0] + 2.2 * x[1];
        let u = p.project(&mesh, affine, |_| [-1.7, 2.2]).unwrap();
        for (v, x) in u.iter().zip(mesh.vertices()) {
            worst[0] = worst[0].max((v - affine(*x)).abs());
        }
        let w = |x: Point| (x[0] * x[1]).sin() + x[0] * x[0];
        let gw = |x: Point| [x[1] * (x[0] * x[1]).cos() + 2.0 * x[0], x[0] * (x[0] * x[1]).cos()];
        let pw = p.project(&mesh, w, gw).unwrap();
        let ppw = p.project_discrete(&mesh, &pw).unwrap();
        for (a, b) in pw.iter().zip(&ppw) {
            worst[1] = worst[1].max((a - b).abs());
        }
        for r in galerkin_residual(&mesh, &pw, gw) {
            worst[2] = worst[2].max(r.abs());
        }
    }
    Outcome::new(
        worst.iter().all(|&e| e < 1e-10),
        format!(
            "affine {:.1e}, idempotence {:.1e}, orthogonality {:.1e} on levels 0-3",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn consistency() -> Outcome {
    let problem = exp1(4);
    let samples = match consistency_probe_exact(&problem, [0.3, -0.2], 0.5, &[2, 3, 4], &SchemeConfig::default()) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let gaps: Vec<f64> = samples.iter().map(|s| s.gap).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(
        decreasing,
        format!(
            "gaps {}",
            gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 8] = [
        (1, "convergence table", convergence),
        (2, "exact solution residual", pde_residual),
        (3, "monotone operators", monotonicity),
        (4, "policy iteration vs enumeration", howard_oracle),
        (5, "value range and constants", bounds_preserved),
        (6, "stability bound", stability_bound),
        (7, "elliptic projection", projection),
        (8, "consistency gap", consistency),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    let mut passed = 0;
    let mut run = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let tag = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {} ({secs:.1}s)", outcome.detail);
        for n in &outcome.notes {
            println!("       {n}");
        }
        if outcome.passed {
            passed += 1;
            if KNOWN_RED.contains(&id) {
                println!("       criterion {id} is listed as known red but passed");
            }
        } else if !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    println!("{passed}/{run} criteria passed; known red: {KNOWN_RED:?}");
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
