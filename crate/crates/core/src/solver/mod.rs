//! Backward-in-time IMEX scheme.
//!
//! Starting from the projected terminal data `v(T) = P v_T`, each step
//! solves
//!
//! ```text
//! min_β max_α [ (v(s^k) - v(s^{k+1}))/h + I v(s^k) + E v(s^{k+1}) - F ] = 0
//! ```
//!
//! row by row with Howard's method. Implicit coefficients are evaluated at
//! `s^k`, explicit ones at `s^{k+1}`.

mod howard;

use std::sync::Arc;

use rayon::prelude::*;

pub use howard::{
    howard_solve_step, infsup_residual_norm, phi, psi, EtaSchedule, HowardConfig, HowardSolution, HowardStats, Policy,
};

use crate::assembly::{
    add_row_frozen_advection, assemble_operator_pair, assemble_templates, Assembler, CoefficientField, OperatorFamily,
    Templates,
};
use crate::error::{SolverError, StabilizationError};
use crate::linalg::SparseLu;
use crate::mesh::{check_strict_acuteness, Mesh, Point};
use crate::problems::IsaacsProblem;
use crate::projection::ProjectionOperator;
use crate::sparse::max_abs;
use crate::stabilization::{
    apply_splitting_policy, max_stable_timestep, SampledCoefficients, SplitCoefficients, SplittingPolicy, ViscosityRule,
};

/// Number of explicit times sampled when the time step is chosen
/// automatically.
const TIME_STEP_SAMPLES: usize = 5;
/// Restarts allowed when an automatically chosen step turns out too large.
const MAX_TIME_STEP_RETRIES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    /// Time step; chosen automatically when absent. Must divide `T`.
    pub h: Option<f64>,
    pub howard: HowardConfig,
    pub policy: SplittingPolicy,
    pub viscosity: ViscosityRule,
    /// Replace the `α` grid by the closed-form maximizing direction (needs a
    /// problem with directional advection and the advection-explicit split).
    pub exact_alpha: bool,
    /// Start each step from the previous step's controls.
    pub warm_start: bool,
    /// Treat a non-converged Howard step as an error.
    pub strict: bool,
    /// Keep every time step in the result, not only `t = T` and `t = 0`.
    pub keep_all_steps: bool,
    /// Record the optimal controls of every step.
    pub record_controls: bool,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            h: None,
            howard: HowardConfig::default(),
            policy: SplittingPolicy::AdvectionExplicit,
            viscosity: ViscosityRule::ElementBound,
            exact_alpha: false,
            warm_start: false,
            strict: false,
            keep_all_steps: true,
            record_controls: false,
        }
    }
}

/// Running check of the discrete `L∞` stability bound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StabilityRecord {
    /// Largest `||v(s^k)||_∞` over all steps.
    pub max_norm: f64,
    /// Bound at the step where `norm / bound` was largest.
    pub bound: f64,
    /// Largest `norm / bound`.
    pub worst_ratio: f64,
}

/// Numerical solution, ordered from `t = T` down to `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub h: f64,
    pub n_steps: usize,
    /// Step index `k` of each stored vector (`t = k h`).
    pub step_indices: Vec<usize>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Controls of each computed step (`k = n_steps - 1, ..., 0`) if recorded.
    pub controls: Vec<Policy>,
    pub howard_stats: Vec<HowardStats>,
    pub stability: StabilityRecord,
    /// Maximum of `||P v_T - v_T||` over nodes is not tracked; boundary
    /// terminal values are replaced by `g(·, T)`.
    pub boundary_mismatch: bool,
}

impl TimeSeries {
    /// Solution at `t = 0`.
    pub fn initial(&self) -> &[f64] {
        self.values.last().expect("time series is never empty")
    }

    /// Stored vector closest to time `t`.
    pub fn at_time(&self, t: f64) -> (f64, &[f64]) {
        let (i, _) = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
            .expect("time series is never empty");
        (self.times[i], &self.values[i])
    }

    /// Howard steps that hit an iteration cap.
    pub fn non_converged_steps(&self) -> usize {
        self.howard_stats.iter().filter(|s| !s.converged).count()
    }
}

/// Operators of a problem on a mesh.
pub struct Discretization<'a> {
    pub mesh: &'a Mesh,
    pub problem: &'a IsaacsProblem,
    assembler: Assembler,
    templates: Templates,
    theta: f64,
    policy: SplittingPolicy,
    viscosity: ViscosityRule,
    exact_alpha: bool,
}

impl<'a> Discretization<'a> {
    pub fn new(mesh: &'a Mesh, problem: &'a IsaacsProblem, config: &SchemeConfig) -> Result<Self, SolverError> {
        let (policy, exact_alpha) = (config.policy, config.exact_alpha);
        let report = check_strict_acuteness(mesh);
        if !report.is_strictly_acute {
            return Err(StabilizationError::NotStrictlyAcute { theta: report.theta }.into());
        }
        if exact_alpha {
            if problem.directional_advection.is_none() {
                return Err(SolverError::Config(format!(
                    "problem '{}' has no closed-form advection maximizer",
                    problem.name
                )));
            }
            if policy != SplittingPolicy::AdvectionExplicit {
                return Err(SolverError::Config("exact alpha needs the advection-explicit split".into()));
            }
        }
        let assembler = Assembler::new(mesh);
        let templates = assemble_templates(&assembler, mesh);
        Ok(Self {
            mesh,
            problem,
            assembler,
            templates,
            theta: report.theta,
            policy,
            viscosity: config.viscosity,
            exact_alpha,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn n_alpha(&self) -> usize {
        if self.exact_alpha {
            1
        } else {
            self.problem.alphas.len()
        }
    }

    pub fn n_beta(&self) -> usize {
        self.problem.betas.len()
    }

    fn sample(&self, t: f64, alpha: f64, beta: f64) -> SampledCoefficients {
        let p = self.problem;
        let (a, b, c) = (p.diffusion.clone(), p.advection.clone(), p.reaction.clone());
        let advection = match (&p.directional_advection, self.exact_alpha) {
            (Some(d), true) => {
                let speed = d.speed.clone();
                CoefficientField::function(move |x: Point| [speed(x, t), 0.0])
            }
            _ => CoefficientField::function(move |x: Point| b(x, t, alpha, beta)),
        };
        SampledCoefficients::sample(
            self.mesh,
            &CoefficientField::function(move |x: Point| a(x, t, alpha, beta)),
            &advection,
            &CoefficientField::function(move |x: Point| c(x, t, alpha, beta)),
        )
    }

    /// Split coefficients of control pair `(alpha, beta)` (grid indices).
    pub fn split(&self, t_implicit: f64, t_explicit: f64, alpha: usize, beta: usize) -> Result<SplitCoefficients, SolverError> {
        let p = self.problem;
        let (al, be) = (p.alphas.values()[alpha], p.betas.values()[beta]);
        let implicit = self.sample(t_implicit, al, be);
        let explicit = if t_explicit == t_implicit {
            implicit.clone()
        } else {
            self.sample(t_explicit, al, be)
        };
        let forcing = (0..self.mesh.n_triangles())
            .map(|k| (p.forcing)(self.mesh.centroid(k), t_implicit, al, be))
            .collect();
        let mut split = apply_splitting_policy(self.mesh, self.theta, self.policy, self.viscosity, &explicit, &implicit, forcing)?;
        if self.exact_alpha {
            split.coefficients.explicit.advection.iter_mut().for_each(|b| *b = [0.0; 2]);
        }
        Ok(split)
    }

    /// `F` on boundary rows for the step from `t_next` to `t_now`: makes the
    /// boundary row of the scheme return `g(·, t_now)` from `g(·, t_next)`.
    pub fn boundary_load(&self, t_now: f64, t_next: f64, h: f64) -> Vec<f64> {
        let g = &self.problem.boundary;
        let mut load = vec![0.0; self.mesh.n_vertices()];
        for (v, l) in load.iter_mut().enumerate().skip(self.mesh.n_interior()) {
            let p = self.mesh.vertex(v);
            let (now, next) = (g(p, t_now), g(p, t_next));
            *l = now + (now - next) / h;
        }
        load
    }

    /// Boundary values `g(·, t)` on boundary nodes, zero inside.
    pub fn boundary_vector(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (v, o) in out.iter_mut().enumerate().skip(self.mesh.n_interior()) {
            *o = (self.problem.boundary)(self.mesh.vertex(v), t);
        }
        out
    }

    /// Operators of all control pairs. With exact `α`, `w_next` is needed to
    /// freeze the maximizing advection direction on each row.
    pub fn family(
        &self,
        t_implicit: f64,
        t_explicit: f64,
        boundary_load: &[f64],
        w_next: Option<&[f64]>,
    ) -> Result<OperatorFamily, SolverError> {
        let (n_alpha, n_beta) = (self.n_alpha(), self.n_beta());
        let row_advection = match (self.exact_alpha, w_next) {
            (true, Some(w)) => Some(self.maximizing_advection(t_explicit, w)),
            (true, None) => return Err(SolverError::Config("exact alpha needs the next time level".into())),
            _ => None,
        };
        let pairs = (0..n_alpha * n_beta)
            .into_par_iter()
            .map(|p| {
                let split = self.split(t_implicit, t_explicit, p % n_alpha, p / n_alpha)?;
                let mut op = assemble_operator_pair(&self.assembler, self.mesh, &split.coefficients, boundary_load)?;
                if let Some(b) = &row_advection {
                    add_row_frozen_advection(&mut op.explicit, &self.templates, b, self.mesh.n_interior());
                }
                Ok(op)
            })
            .collect::<Result<Vec<_>, SolverError>>()?;
        Ok(OperatorFamily::new(
            self.assembler.pattern().clone(),
            self.mesh.n_interior(),
            n_alpha,
            n_beta,
            pairs,
        )?)
    }

    /// `b_ℓ = s(y_ℓ, t)·(-G_ℓ/|G_ℓ|)` with `G_ℓ = <∇w, φ̂_ℓ>`.
    fn maximizing_advection(&self, t: f64, w: &[f64]) -> Vec<Point> {
        let speed = &self.problem.directional_advection.as_ref().expect("checked in new").speed;
        let gx = self.templates.advection_x.mat_vec(w);
        let gy = self.templates.advection_y.mat_vec(w);
        (0..self.mesh.n_vertices())
            .map(|v| {
                let n = gx[v].hypot(gy[v]);
                if n == 0.0 {
                    [0.0, 0.0]
                } else {
                    let s = speed(self.mesh.vertex(v), t);
                    [-s * gx[v] / n, -s * gy[v] / n]
                }
            })
            .collect()
    }

    /// Largest time step keeping `hE - Id` non-positive over a few explicit
    /// times (or `None` if unbounded).
    pub fn sampled_max_timestep(&self) -> Result<Option<f64>, SolverError> {
        let big_t = self.problem.final_time;
        let times: Vec<f64> = if self.problem.time_dependent {
            (0..TIME_STEP_SAMPLES)
                .map(|i| big_t * i as f64 / (TIME_STEP_SAMPLES - 1) as f64)
                .collect()
        } else {
            vec![big_t]
        };
        let load = vec![0.0; self.mesh.n_vertices()];
        let mut h_max: Option<f64> = None;
        for t in times {
            // with exact α the row-frozen advection has zero diagonal on
            // symmetric patches; the interpolated terminal data stands in for w
            let w = self.mesh.interpolate(|x| (self.problem.terminal)(x));
            let fam = self.family(t, t, &load, Some(&w))?;
            if let Some(h) = max_stable_timestep(&fam)? {
                h_max = Some(h_max.map_or(h, |m: f64| m.min(h)));
            }
        }
        Ok(h_max)
    }

    /// Fraction of interior nodes receiving artificial diffusion beyond the
    /// natural one for some control pair at time `t`.
    pub fn top_up_fraction(&self, t: f64) -> Result<f64, SolverError> {
        let ni = self.mesh.n_interior();
        if ni == 0 {
            return Ok(0.0);
        }
        let mut topped = vec![false; ni];
        for p in 0..self.n_alpha() * self.n_beta() {
            let split = self.split(t, t, p % self.n_alpha(), p / self.n_alpha())?;
            for (flag, &top) in topped.iter_mut().zip(&split.top_up) {
                *flag |= top > 0.0;
            }
        }
        Ok(topped.iter().filter(|&&f| f).count() as f64 / ni as f64)
    }

    /// Elliptic projection of the terminal data with boundary values replaced
    /// by `g(·, T)`.
    pub fn terminal_vector(&self, projection: &ProjectionOperator) -> Result<(Vec<f64>, bool), SolverError> {
        let p = self.problem;
        let mut v = projection.project(self.mesh, |x| (p.terminal)(x), |x| (p.terminal_gradient)(x))?;
        let mut mismatch = false;
        for (i, vi) in v.iter_mut().enumerate().skip(self.mesh.n_interior()) {
            let g = (p.boundary)(self.mesh.vertex(i), p.final_time);
            mismatch |= (g - *vi).abs() > 1e-9;
            *vi = g;
        }
        Ok((v, mismatch))
    }
}

/// Number of steps and step size: `config.h` if given, else the largest
/// stable step that divides `T` (or `T / ceil(T/Δx)` when unbounded).
fn initial_step_count(disc: &Discretization, config: &SchemeConfig) -> Result<(usize, bool), SolverError> {
    let big_t = disc.problem.final_time;
    if let Some(h) = config.h {
        if !(h > 0.0) {
            return Err(SolverError::Config("time step must be positive".into()));
        }
        let n = (big_t / h).round();
        if n < 1.0 || ((n * h - big_t).abs() > 1e-9 * big_t) {
            return Err(SolverError::Config(format!("time step {h} does not divide T = {big_t}")));
        }
        return Ok((n as usize, false));
    }
    let n = match disc.sampled_max_timestep()? {
        Some(h_max) => (big_t / h_max * (1.0 + 1e-12)).ceil(),
        None => (big_t / disc.mesh.mesh_size()).ceil(),
    };
    Ok((n.max(1.0) as usize, true))
}

/// Solves the problem on `mesh` backward from `T` to `0`.
pub fn solve_isaacs(problem: &IsaacsProblem, mesh: &Mesh, config: &SchemeConfig) -> Result<TimeSeries, SolverError> {
    // sequential sparse factorizations keep runs bit-reproducible
    faer::set_global_parallelism(faer::Par::Seq);
    config.howard.validate()?;
    if !(problem.final_time > 0.0) {
        return Err(SolverError::Config("final time must be positive".into()));
    }
    let disc = Discretization::new(mesh, problem, config)?;
    let projection = ProjectionOperator::new(mesh)?;
    let (mut n_steps, auto) = initial_step_count(&disc, config)?;
    let mut retries = 0;
    loop {
        match run(&disc, &projection, config, n_steps) {
            Err(SolverError::TimeStepTooLarge { h_max, .. }) if auto && retries < MAX_TIME_STEP_RETRIES => {
                retries += 1;
                n_steps = ((problem.final_time / h_max) * (1.0 + 1e-12)).ceil() as usize;
            }
            other => return other,
        }
    }
}

fn run(disc: &Discretization, projection: &ProjectionOperator, config: &SchemeConfig, n_steps: usize) -> Result<TimeSeries, SolverError> {
    let mesh = disc.mesh;
    let problem = disc.problem;
    let big_t = problem.final_time;
    let h = big_t / n_steps as f64;
    let time = |k: usize| if k == n_steps { big_t } else { k as f64 * h };

    let (terminal, mismatch) = disc.terminal_vector(projection)?;
    let lu = SparseLu::new(Arc::new(crate::sparse::SparsePattern::from_mesh(mesh)))?;
    let mut series = TimeSeries {
        h,
        n_steps,
        step_indices: vec![n_steps],
        times: vec![big_t],
        values: vec![terminal.clone()],
        controls: Vec::new(),
        howard_stats: Vec::with_capacity(n_steps),
        stability: StabilityRecord::default(),
        boundary_mismatch: mismatch,
    };

    // stability bound: ||v^k|| <= ||v^N - G^N|| + Σ h D_j + Σ residuals + ||G^k||
    let mut g_next = disc.boundary_vector(big_t);
    let e_terminal = terminal.iter().zip(&g_next).map(|(v, g)| (v - g).abs()).fold(0.0, f64::max);
    let mut accumulated = e_terminal;
    series.stability.max_norm = max_abs(&terminal);
    series.stability.bound = e_terminal + max_abs(&g_next);
    series.stability.worst_ratio = ratio(series.stability.max_norm, series.stability.bound);

    let mut w = terminal;
    let mut cached: Option<OperatorFamily> = None;
    let mut previous_policy: Option<Policy> = None;
    for k in (0..n_steps).rev() {
        let (t_now, t_next) = (time(k), time(k + 1));
        let reuse = !problem.time_dependent && !config.exact_alpha;
        let family = match (&cached, reuse) {
            (Some(f), true) => f.clone(),
            _ => {
                let load = disc.boundary_load(t_now, t_next, h);
                let f = disc.family(t_now, t_next, &load, Some(&w))?;
                check_time_step(&f, h, t_now)?;
                if reuse {
                    cached = Some(f.clone());
                }
                f
            }
        };
        let initial = if config.warm_start { previous_policy.as_ref() } else { None };
        let sol = howard_solve_step(&family, &w, h, &config.howard, initial, &lu)?;
        if config.strict && !sol.stats.converged {
            return Err(SolverError::NotConverged {
                time: t_now,
                residual: sol.stats.residual,
            });
        }

        let g_now = disc.boundary_vector(t_now);
        accumulated += h * consistency_defect(&family, &g_now, &g_next, h) + sol.stats.residual;
        let bound = accumulated + max_abs(&g_now);
        let norm = max_abs(&sol.u);
        let slack = 1e-9 * (1.0 + bound);
        if norm > bound + slack {
            return Err(SolverError::StabilityViolated { time: t_now, norm, bound });
        }
        let st = &mut series.stability;
        st.max_norm = st.max_norm.max(norm);
        let r = ratio(norm, bound);
        if r > st.worst_ratio {
            st.worst_ratio = r;
            st.bound = bound;
        }

        series.howard_stats.push(sol.stats);
        if config.record_controls {
            series.controls.push(sol.policy.clone());
        }
        if config.keep_all_steps || k == 0 {
            series.step_indices.push(k);
            series.times.push(t_now);
            series.values.push(sol.u.clone());
        }
        previous_policy = Some(sol.policy);
        w = sol.u;
        g_next = g_now;
    }
    Ok(series)
}

fn ratio(norm: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        norm / bound
    } else if norm > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// `max_{pairs, interior ℓ} |(I G^k + E G^{k+1} - F)_ℓ|` for the boundary
/// vectors `G`.
fn consistency_defect(family: &OperatorFamily, g_now: &[f64], g_next: &[f64], _h: f64) -> f64 {
    let p = family.pattern();
    family
        .pairs()
        .par_iter()
        .map(|op| {
            (0..family.n_interior())
                .map(|row| (p.row_dot(&op.implicit, row, g_now) + p.row_dot(&op.explicit, row, g_next) - op.load[row]).abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

fn check_time_step(family: &OperatorFamily, h: f64, time: f64) -> Result<(), SolverError> {
    if let Some(h_max) = max_stable_timestep(family)? {
        if h > h_max * (1.0 + 1e-12) {
            return Err(SolverError::TimeStepTooLarge { h, h_max, time });
        }
    }
    Ok(())
}
