//! Command-line interface: `check-mesh`, `convergence`, `solve`, `validate`.
//!
//! Exit codes: 0 success, 1 property failure (non-acute mesh, bound
//! violated), 2 input error, 3 solver failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{convergence_study, records_to_csv};
use crate::error::{MeshError, ProblemError, SolverError, StabilizationError};
use crate::export::{triangles_csv, values_csv, values_vtk};
use crate::mesh::{check_strict_acuteness, generate_annulus_mesh, generate_triangle_mesh, load_mesh, Mesh};
use crate::problems::{builtin, load_problem_config, validate_problem, Domain, Experiment1, IsaacsProblem, TagChase};
use crate::solver::{solve_isaacs, EtaSchedule, HowardConfig, SchemeConfig};
use crate::stabilization::{SplittingPolicy, ViscosityRule};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Environment variable consulted when `--threads` is absent.
pub const THREADS_ENV: &str = "ISAACS_FEM_THREADS";

/// Tolerance on a problem's a-priori value range.
const BOUNDS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "isaacs-fem", version, about = "Monotone finite elements for Isaacs equations")]
pub struct Cli {
    /// Worker threads; falls back to ISAACS_FEM_THREADS, then to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Report how strictly acute a mesh is.
    CheckMesh(CheckMeshArgs),
    /// Error table of a problem with a known solution over refinement levels.
    Convergence(ConvergenceArgs),
    /// Solve a problem and export snapshots.
    Solve(SolveArgs),
    /// Sample a problem's coefficients and data for admissibility.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["triangle", "annulus", "file"])))]
pub struct CheckMeshArgs {
    /// Refined equilateral triangle.
    #[arg(long)]
    pub triangle: bool,
    #[arg(long, default_value_t = 3)]
    pub level: u32,
    /// Annulus mesh.
    #[arg(long)]
    pub annulus: bool,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long = "big-r", default_value_t = 2.0)]
    pub big_r: f64,
    #[arg(long, default_value_t = 16)]
    pub n_radial: usize,
    #[arg(long, default_value_t = 64)]
    pub n_angular: usize,
    /// Mesh file in the plain-text format.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ProblemArgs {
    /// Built-in problem: exp1 or tag-chase.
    #[arg(long, default_value = "exp1", conflicts_with = "config")]
    pub problem: String,
    /// TOML problem description.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Triangle refinement level (exp1).
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub n_alpha: Option<usize>,
    #[arg(long)]
    pub n_beta: Option<usize>,
    #[arg(long)]
    pub final_time: Option<f64>,
    /// Inner radius (tag-chase).
    #[arg(long)]
    pub r: Option<f64>,
    /// Outer radius (tag-chase).
    #[arg(long = "big-r")]
    pub big_r: Option<f64>,
    #[arg(long)]
    pub n_radial: Option<usize>,
    #[arg(long)]
    pub n_angular: Option<usize>,
    /// Replace the problem's domain by a mesh file.
    #[arg(long)]
    pub mesh_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SchemeArgs {
    /// Time step; must divide T. Chosen as the largest monotone step if absent.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long, default_value = "advection-explicit", value_parser = ["advection-explicit", "fully-implicit"])]
    pub policy: String,
    #[arg(long, default_value = "element-bound", value_parser = ["element-bound", "sharp"])]
    pub viscosity: String,
    /// Use the closed-form maximizing advection direction instead of the α grid.
    #[arg(long)]
    pub exact_alpha: bool,
    /// Start each step's policy iteration from the previous step's controls.
    #[arg(long)]
    pub warm_start: bool,
    /// Treat a non-converged policy iteration as a failure.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub eta: f64,
    /// Initial inner tolerance of a geometric schedule (constant if absent).
    #[arg(long)]
    pub eta_initial: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eta_ratio: f64,
    #[arg(long, default_value_t = 100)]
    pub max_inner: usize,
    #[arg(long, default_value_t = 50)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub linear_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Levels as `a..b` (inclusive) or a comma list.
    #[arg(long, default_value = "3..6")]
    pub levels: String,
    /// Output directory.
    #[arg(long, default_value = "out/convergence")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub scheme: SchemeArgs,
    /// Snapshot times (nearest time step is written).
    #[arg(long = "snapshot", default_values_t = [0.0])]
    pub snapshots: Vec<f64>,
    /// Output directory.
    #[arg(long, default_value = "out/solve")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Mesh description stored in a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshProvenance {
    pub source: String,
    pub vertices: usize,
    pub triangles: usize,
    pub interior: usize,
    pub mesh_size: f64,
    pub theta_degrees: f64,
}

impl MeshProvenance {
    pub fn new(source: String, mesh: &Mesh) -> Self {
        Self {
            source,
            vertices: mesh.n_vertices(),
            triangles: mesh.n_triangles(),
            interior: mesh.n_interior(),
            mesh_size: mesh.mesh_size(),
            theta_degrees: check_strict_acuteness(mesh).theta_degrees(),
        }
    }
}

/// Record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Resolved flags, defaults included.
    pub flags: serde_json::Value,
    pub meshes: Vec<MeshProvenance>,
    /// SHA-256 of the canonical JSON of `flags` and the problem config text.
    pub config_hash: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub status: String,
    pub artifacts: Vec<String>,
    pub results: serde_json::Value,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Hex SHA-256 of the canonical flag JSON followed by `extra`.
pub fn config_hash(flags: &serde_json::Value, extra: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(flags).expect("flags serialize").as_bytes());
    hasher.update(extra);
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Failure of a command together with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        Self::input(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        let code = match &e {
            SolverError::Config(_) => EXIT_INPUT,
            SolverError::StabilityViolated { .. }
            | SolverError::Stabilization(StabilizationError::NotStrictlyAcute { .. }) => EXIT_PROPERTY,
            _ => EXIT_SOLVER,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::input(format!("{}: {e}", path.display()))
}

/// Parses `a..b` (inclusive) or `a,b,c`.
pub fn parse_levels(s: &str) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::input(format!("invalid levels '{s}'"));
    let levels: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if levels.is_empty() || levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad());
    }
    Ok(levels)
}

/// Resolved problem plus the text of its config file, if any.
pub fn resolve_problem(args: &ProblemArgs) -> Result<(IsaacsProblem, Vec<u8>), CliError> {
    let (mut problem, config_text) = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            let base = path.parent().unwrap_or(Path::new("."));
            (load_problem_config(&text, base)?, text.into_bytes())
        }
        None => {
            let p = match args.problem.as_str() {
                "exp1" | "experiment1" => {
                    let d = Experiment1::default();
                    Experiment1 {
                        n_alpha: args.n_alpha.unwrap_or(d.n_alpha),
                        n_beta: args.n_beta.unwrap_or(d.n_beta),
                        final_time: args.final_time.unwrap_or(d.final_time),
                        level: args.level.unwrap_or(d.level),
                    }
                    .build()
                }
                "tag-chase" | "tag_chase" => {
                    let d = TagChase::default();
                    TagChase {
                        r: args.r.unwrap_or(d.r),
                        big_r: args.big_r.unwrap_or(d.big_r),
                        final_time: args.final_time.unwrap_or(d.final_time),
                        n_alpha: args.n_alpha.unwrap_or(d.n_alpha),
                        n_beta: args.n_beta.unwrap_or(d.n_beta),
                        n_radial: args.n_radial.unwrap_or(d.n_radial),
                        n_angular: args.n_angular.unwrap_or(d.n_angular),
                    }
                    .build()
                }
                other => builtin(other)?,
            };
            (p, Vec::new())
        }
    };
    if args.config.is_some() {
        if let (Some(a), Some(b)) = (args.n_alpha.or(Some(problem.alphas.len())), args.n_beta.or(Some(problem.betas.len()))) {
            problem = problem.with_control_counts(a, b);
        }
        if let Some(t) = args.final_time {
            problem.final_time = t;
        }
        if let (Some(level), Domain::Triangle { .. }) = (args.level, &problem.domain) {
            problem.domain = Domain::Triangle { level };
        }
    }
    if !(problem.final_time > 0.0) {
        return Err(CliError::input("final time must be positive"));
    }
    if problem.alphas.is_empty() || problem.betas.is_empty() {
        return Err(CliError::input("control grids must not be empty"));
    }
    if let Some(path) = &args.mesh_file {
        problem.domain = Domain::MeshFile(path.clone());
    }
    Ok((problem, config_text))
}

pub fn scheme_config(args: &SchemeArgs) -> Result<SchemeConfig, CliError> {
    let policy: SplittingPolicy = args.policy.parse().map_err(CliError::input)?;
    let viscosity: ViscosityRule = args.viscosity.parse().map_err(CliError::input)?;
    let eta_schedule = match args.eta_initial {
        Some(initial) => EtaSchedule::Geometric {
            initial,
            ratio: args.eta_ratio,
        },
        None => EtaSchedule::Constant,
    };
    let config = SchemeConfig {
        h: args.h,
        howard: HowardConfig {
            eta: args.eta,
            eta_schedule,
            max_inner: args.max_inner,
            max_outer: args.max_outer,
            linear_tol: args.linear_tol,
        },
        policy,
        viscosity,
        exact_alpha: args.exact_alpha,
        warm_start: args.warm_start,
        strict: args.strict,
        keep_all_steps: true,
        record_controls: false,
    };
    config.howard.validate()?;
    Ok(config)
}

fn build_mesh(domain: &Domain) -> Result<Mesh, CliError> {
    match domain {
        Domain::MeshFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            load_mesh(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
        }
        other => Ok(other.build_mesh()?),
    }
}

/// Resolves the worker count from the flag, then the environment.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::input(format!("{THREADS_ENV}={v} is not a thread count")))?,
            Err(_) => 0,
        },
    };
    Ok(if n == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        n
    })
}

fn write_file(dir: &Path, name: &str, contents: &str, artifacts: &mut Vec<String>) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    artifacts.push(name.to_string());
    Ok(())
}

struct Outcome {
    code: i32,
    status: String,
}

/// Runs the CLI on `args` (program name first), writing reports to `out`
/// and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// Runs a parsed command inside a thread pool of the requested size.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let threads = resolve_threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    let mut buf = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::CheckMesh(a) => check_mesh(a, &mut buf),
        Command::Convergence(a) => convergence(a, threads, &mut buf),
        Command::Solve(a) => solve(a, threads, &mut buf),
        Command::Validate(a) => validate(a, &mut buf),
    });
    let _ = out.write_all(&buf);
    result
}

fn check_mesh(args: &CheckMeshArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (mesh, source) = if let Some(path) = &args.file {
        (build_mesh(&Domain::MeshFile(path.clone()))?, path.display().to_string())
    } else if args.annulus {
        let m = generate_annulus_mesh(args.r, args.big_r, args.n_radial, args.n_angular)?;
        (m, format!("annulus r={} R={} {}x{}", args.r, args.big_r, args.n_radial, args.n_angular))
    } else {
        (generate_triangle_mesh(args.level), format!("triangle level {}", args.level))
    };
    let report = check_strict_acuteness(&mesh);
    let w = report.worst_pair;
    let _ = writeln!(out, "mesh        {source}");
    let _ = writeln!(out, "vertices    {} ({} interior)", mesh.n_vertices(), mesh.n_interior());
    let _ = writeln!(out, "triangles   {}", mesh.n_triangles());
    let _ = writeln!(out, "mesh size   {:.4}", mesh.mesh_size());
    let _ = writeln!(out, "theta       {:.2} deg", report.theta_degrees().max(0.0));
    let _ = writeln!(
        out,
        "worst pair  element {} nodes ({}, {})",
        w.element,
        mesh.external_id(w.nodes.0),
        mesh.external_id(w.nodes.1)
    );
    let _ = writeln!(out, "strictly acute: {}", if report.is_strictly_acute { "yes" } else { "no" });
    Ok(if report.is_strictly_acute { EXIT_OK } else { EXIT_PROPERTY })
}

fn finish_manifest(
    dir: &Path,
    mut manifest: RunManifest,
    start: Instant,
    mut artifacts: Vec<String>,
) -> Result<(), CliError> {
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    artifacts.push("manifest.json".into());
    manifest.artifacts = artifacts;
    let path = dir.join("manifest.json");
    std::fs::write(&path, manifest.to_json()).map_err(|e| io_error(&path, e))
}

fn new_manifest(subcommand: &str, flags: serde_json::Value, extra: &[u8], threads: usize) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        subcommand: subcommand.into(),
        config_hash: config_hash(&flags, extra),
        flags,
        meshes: Vec::new(),
        threads,
        wall_time_s: 0.0,
        status: String::new(),
        artifacts: Vec::new(),
        results: serde_json::Value::Null,
    }
}

fn convergence(args: &ConvergenceArgs, threads: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let start = Instant::now();
    let (problem, config_text) = resolve_problem(&args.problem)?;
    let config = scheme_config(&args.scheme)?;
    let levels = parse_levels(&args.levels)?;
    if problem.exact.is_none() {
        return Err(CliError::input(format!("problem '{}' has no exact solution", problem.name)));
    }
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let flags = serde_json::to_value(args).expect("flags serialize");
    let mut manifest = new_manifest("convergence", flags, &config_text, threads);

    let study = convergence_study(&problem, &levels, &config)?;
    let csv = records_to_csv(&study.records);
    let _ = out.write_all(csv.as_bytes());
    let mut artifacts = Vec::new();
    write_file(&args.out, "convergence.csv", &csv, &mut artifacts)?;

    manifest.meshes = levels
        .iter()
        .take(study.records.len() + usize::from(study.failure.is_some()))
        .map(|&l| MeshProvenance::new(format!("triangle level {l}"), &generate_triangle_mesh(l)))
        .collect();
    manifest.results = serde_json::json!({
        "levels": levels,
        "non_converged_steps": study.records.iter().map(|r| r.non_converged_steps).collect::<Vec<_>>(),
    });
    let outcome = match &study.failure {
        None => Outcome {
            code: EXIT_OK,
            status: "ok".into(),
        },
        Some((level, e)) => {
            let code = CliError::from(e.clone()).code;
            Outcome {
                code,
                status: format!("failed at level {level}: {e}"),
            }
        }
    };
    manifest.status = outcome.status.clone();
    finish_manifest(&args.out, manifest, start, artifacts)?;
    if outcome.code != EXIT_OK {
        return Err(CliError {
            code: outcome.code,
            message: outcome.status,
        });
    }
    Ok(EXIT_OK)
}

fn snapshot_name(t: f64) -> String {
    format!("values_t{t:.6}")
}

fn solve(args: &SolveArgs, threads: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let start = Instant::now();
    let (problem, config_text) = resolve_problem(&args.problem)?;
    let config = scheme_config(&args.scheme)?;
    for &t in &args.snapshots {
        if !(0.0..=problem.final_time).contains(&t) {
            return Err(CliError::input(format!("snapshot time {t} outside [0, {}]", problem.final_time)));
        }
    }
    let mesh = build_mesh(&problem.domain)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let flags = serde_json::to_value(args).expect("flags serialize");
    let mut manifest = new_manifest("solve", flags, &config_text, threads);
    manifest.meshes = vec![MeshProvenance::new(problem.domain.describe(), &mesh)];

    let series = match solve_isaacs(&problem, &mesh, &config) {
        Ok(s) => s,
        Err(e) => {
            let e = CliError::from(e);
            manifest.status = format!("failed: {}", e.message);
            finish_manifest(&args.out, manifest, start, Vec::new())?;
            return Err(e);
        }
    };
    let mut artifacts = Vec::new();
    write_file(&args.out, "triangles.csv", &triangles_csv(&mesh), &mut artifacts)?;
    let mut written = Vec::new();
    for &t in &args.snapshots {
        let (actual, values) = series.at_time(t);
        let name = snapshot_name(actual);
        if written.iter().any(|(a, _): &(f64, String)| *a == actual) {
            continue;
        }
        write_file(&args.out, &format!("{name}.csv"), &values_csv(&mesh, values), &mut artifacts)?;
        let title = format!("{} t={actual}", problem.name);
        write_file(&args.out, &format!("{name}.vtk"), &values_vtk(&mesh, values, "value", &title), &mut artifacts)?;
        written.push((actual, name));
    }

    let (lo, hi) = series
        .values
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let in_bounds = problem
        .value_bounds
        .is_none_or(|(a, b)| lo >= a - BOUNDS_TOLERANCE && hi <= b + BOUNDS_TOLERANCE);
    manifest.results = serde_json::json!({
        "h": series.h,
        "n_steps": series.n_steps,
        "snapshot_times": written.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
        "value_min": lo,
        "value_max": hi,
        "value_bounds": problem.value_bounds.map(|(a, b)| [a, b]),
        "stability_worst_ratio": series.stability.worst_ratio,
        "non_converged_steps": series.non_converged_steps(),
        "terminal_boundary_mismatch": series.boundary_mismatch,
    });
    manifest.status = if in_bounds { "ok".into() } else { "value bounds violated".into() };
    let _ = writeln!(out, "problem     {}", problem.name);
    let _ = writeln!(out, "mesh        {} ({} vertices)", problem.domain.describe(), mesh.n_vertices());
    let _ = writeln!(out, "time step   {:.6e} ({} steps)", series.h, series.n_steps);
    let _ = writeln!(out, "value range [{lo:.6e}, {hi:.6e}]");
    let _ = writeln!(out, "stability   max |v| / bound = {:.6}", series.stability.worst_ratio);
    if series.non_converged_steps() > 0 {
        let _ = writeln!(out, "warning     {} steps hit the iteration cap", series.non_converged_steps());
    }
    if let Some(exact) = &problem.exact {
        let e = crate::analysis::compute_errors(
            &mesh,
            series.initial(),
            |x| (exact.value)(x, 0.0),
            |x| (exact.gradient)(x, 0.0),
        );
        let _ = writeln!(out, "error t=0   inf {:.4e}  l2 {:.4e}  h1 {:.4e}", e.inf, e.l2, e.h1);
    }
    for (_, name) in &written {
        let _ = writeln!(out, "wrote       {}", args.out.join(format!("{name}.csv")).display());
    }
    finish_manifest(&args.out, manifest, start, artifacts)?;
    if !in_bounds {
        return Err(CliError {
            code: EXIT_PROPERTY,
            message: format!("values [{lo:e}, {hi:e}] leave the admissible range"),
        });
    }
    Ok(EXIT_OK)
}

fn validate(args: &ValidateArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let (problem, _) = resolve_problem(&args.problem)?;
    let mesh = build_mesh(&problem.domain)?;
    let report = validate_problem(&problem, &mesh, args.samples, args.seed);
    let _ = writeln!(out, "problem {} on {}", problem.name, problem.domain.describe());
    let _ = out.write_all(report.to_text().as_bytes());
    Ok(if report.is_clean() { EXIT_OK } else { EXIT_PROPERTY })
}
