use std::f64::consts::PI;
use std::sync::Arc;

use super::{ControlSet, DirectionalAdvection, Domain, ExactSolution, IsaacsProblem};
use crate::mesh::Point;

/// Degenerate problem on the equilateral triangle with a known radial
/// solution
///
/// ```text
/// v(x, t) = exp(-ρ) + ρ,   ρ = |x| / sqrt(T - t + 1)
/// ```
///
/// Coefficients, with `τ = T - t + 1` and `α` an angle:
/// `a = β|x|/√τ` for `β ∈ [1/4, 1/2]`, `b = (cos α, sin α)/(2√τ)`, `c = 0`,
/// `f = -|x|/(2 τ^{3/2})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment1 {
    pub n_alpha: usize,
    pub n_beta: usize,
    pub final_time: f64,
    pub level: u32,
}

impl Default for Experiment1 {
    fn default() -> Self {
        Self {
            n_alpha: 16,
            n_beta: 8,
            final_time: 1.0,
            level: 3,
        }
    }
}

pub fn experiment1() -> IsaacsProblem {
    Experiment1::default().build()
}

fn radius(x: Point) -> f64 {
    x[0].hypot(x[1])
}

impl Experiment1 {
    pub fn build(&self) -> IsaacsProblem {
        let big_t = self.final_time;
        let tau = move |t: f64| big_t - t + 1.0;
        let value = move |x: Point, t: f64| {
            let rho = radius(x) / tau(t).sqrt();
            (-rho).exp() + rho
        };
        let gradient = move |x: Point, t: f64| {
            let r = radius(x);
            let s = tau(t).sqrt();
            let rho = r / s;
            // v'(ρ)/(r√τ), continuous at the origin
            let factor = if rho < 1e-8 { (1.0 - 0.5 * rho) / (s * s) } else { -(-rho).exp_m1() / (r * s) };
            [factor * x[0], factor * x[1]]
        };
        let time_derivative = move |x: Point, t: f64| {
            let r = radius(x);
            let tt = tau(t);
            let rho = r / tt.sqrt();
            -(-rho).exp_m1() * 0.5 * r / tt.powf(1.5)
        };
        let laplacian = move |x: Point, t: f64| {
            let r = radius(x);
            let tt = tau(t);
            let s = tt.sqrt();
            let rho = r / s;
            let radial = if rho < 1e-8 { (1.0 - 0.5 * rho) / tt } else { -(-rho).exp_m1() / (r * s) };
            (-rho).exp() / tt + radial
        };
        IsaacsProblem {
            name: "exp1".into(),
            domain: Domain::Triangle { level: self.level },
            alphas: ControlSet::periodic(0.0, 2.0 * PI, self.n_alpha),
            betas: ControlSet::interval(0.25, 0.5, self.n_beta),
            diffusion: Arc::new(move |x, t, _, beta| beta * radius(x) / tau(t).sqrt()),
            advection: Arc::new(move |_, t, alpha, _| {
                let s = 0.5 / tau(t).sqrt();
                [s * alpha.cos(), s * alpha.sin()]
            }),
            reaction: Arc::new(|_, _, _, _| 0.0),
            forcing: Arc::new(move |x, t, _, _| -0.5 * radius(x) / tau(t).powf(1.5)),
            boundary: Arc::new(value),
            terminal: Arc::new(move |x| value(x, big_t)),
            terminal_gradient: Arc::new(move |x| gradient(x, big_t)),
            final_time: big_t,
            time_dependent: true,
            exact: Some(ExactSolution {
                value: Arc::new(value),
                gradient: Arc::new(gradient),
                time_derivative: Arc::new(time_derivative),
                laplacian: Arc::new(laplacian),
            }),
            directional_advection: Some(DirectionalAdvection {
                speed: Arc::new(move |_, t| 0.5 / tau(t).sqrt()),
            }),
            value_bounds: None,
        }
    }
}
