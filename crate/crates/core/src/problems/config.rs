//! User-defined problems from a TOML file.
//!
//! ```toml
//! name = "drift"
//! final_time = 1.0
//!
//! [domain]
//! kind = "triangle"      # or "annulus" (r, R, n_radial, n_angular) or "file" (path)
//! level = 3
//!
//! [controls.alpha]
//! kind = "periodic"      # start, period, count
//! start = 0.0
//! period = 6.283185307179586
//! count = 8
//!
//! [controls.beta]
//! kind = "interval"      # lower, upper, count
//! lower = 0.5
//! upper = 1.0
//! count = 2
//!
//! [coefficients]
//! a = "beta"
//! b_x = "cos(alpha)"
//! b_y = "sin(alpha)"
//! c = "0"
//! f = "1"
//! g = "0"                # over x, y, t
//! terminal = "0"         # over x, y
//! exact = "..."          # optional, over x, y, t
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::Deserialize;

use super::expr::Expr;
use super::{ControlSet, Domain, ExactSolution, IsaacsProblem};
use crate::error::ProblemError;
use crate::mesh::Point;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default = "default_final_time")]
    pub final_time: f64,
    pub domain: DomainConfig,
    pub controls: ControlsConfig,
    pub coefficients: CoefficientsConfig,
}

fn default_final_time() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Triangle {
        #[serde(default = "default_level")]
        level: u32,
    },
    Annulus {
        r: f64,
        #[serde(rename = "R")]
        big_r: f64,
        n_radial: usize,
        n_angular: usize,
    },
    File {
        path: String,
    },
}

fn default_level() -> u32 {
    3
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlsConfig {
    pub alpha: ControlConfig,
    pub beta: ControlConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControlConfig {
    Interval { lower: f64, upper: f64, count: usize },
    Periodic { start: f64, period: f64, count: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientsConfig {
    pub a: String,
    #[serde(default = "zero")]
    pub b_x: String,
    #[serde(default = "zero")]
    pub b_y: String,
    #[serde(default = "zero")]
    pub c: String,
    #[serde(default = "zero")]
    pub f: String,
    pub g: String,
    pub terminal: String,
    pub exact: Option<String>,
}

fn zero() -> String {
    "0".into()
}

/// Parses a TOML problem description. Relative mesh paths are resolved
/// against `base_dir`.
pub fn load_problem_config(text: &str, base_dir: &Path) -> Result<IsaacsProblem, ProblemError> {
    let cfg: ProblemConfig = toml::from_str(text).map_err(|e| ProblemError::Config(e.to_string()))?;
    cfg.build(base_dir)
}

fn control_set(c: &ControlConfig, which: &str) -> Result<ControlSet, ProblemError> {
    match *c {
        ControlConfig::Interval { lower, upper, count } if count >= 1 && lower <= upper => {
            Ok(ControlSet::interval(lower, upper, count))
        }
        ControlConfig::Periodic { start, period, count } if count >= 1 && period > 0.0 => {
            Ok(ControlSet::periodic(start, period, count))
        }
        _ => Err(ProblemError::Config(format!("invalid control set for {which}"))),
    }
}

fn parse(name: &str, src: &str, allowed: &[usize]) -> Result<Expr, ProblemError> {
    let e = Expr::parse(src).map_err(|e| match e {
        ProblemError::Expression { offset, message } => ProblemError::Config(format!(
            "coefficient '{name}': {message} at offset {offset}"
        )),
        other => other,
    })?;
    for slot in 0..5 {
        if e.uses(slot) && !allowed.contains(&slot) {
            return Err(ProblemError::Config(format!(
                "coefficient '{name}' may not depend on '{}'",
                super::expr::VARIABLES[slot]
            )));
        }
    }
    Ok(e)
}

/// Central difference step for derivatives of user expressions.
fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

impl ProblemConfig {
    pub fn build(&self, base_dir: &Path) -> Result<IsaacsProblem, ProblemError> {
        if !(self.final_time > 0.0) {
            return Err(ProblemError::Config("final_time must be positive".into()));
        }
        let domain = match &self.domain {
            DomainConfig::Triangle { level } => Domain::Triangle { level: *level },
            DomainConfig::Annulus {
                r,
                big_r,
                n_radial,
                n_angular,
            } => Domain::Annulus {
                r: *r,
                big_r: *big_r,
                n_radial: *n_radial,
                n_angular: *n_angular,
            },
            DomainConfig::File { path } => Domain::MeshFile(base_dir.join(path)),
        };
        let all = [0, 1, 2, 3, 4];
        let space_time = [0, 1, 2];
        let c = &self.coefficients;
        let a = Arc::new(parse("a", &c.a, &all)?);
        let bx = Arc::new(parse("b_x", &c.b_x, &all)?);
        let by = Arc::new(parse("b_y", &c.b_y, &all)?);
        let re = Arc::new(parse("c", &c.c, &all)?);
        let f = Arc::new(parse("f", &c.f, &all)?);
        let g = Arc::new(parse("g", &c.g, &space_time)?);
        let terminal = Arc::new(parse("terminal", &c.terminal, &[0, 1])?);
        let exact = c
            .exact
            .as_deref()
            .map(|s| parse("exact", s, &space_time).map(Arc::new))
            .transpose()?;
        let time_dependent = [&a, &bx, &by, &re, &f, &g].iter().any(|e| e.uses(2));

        let vars = |x: Point, t: f64, al: f64, be: f64| [x[0], x[1], t, al, be];
        let term_value = {
            let e = terminal.clone();
            move |x: Point| e.eval(&vars(x, 0.0, 0.0, 0.0))
        };
        let term_gradient = {
            let v = term_value.clone();
            move |x: Point| {
                let (dx, dy) = (fd_step(x[0]), fd_step(x[1]));
                [
                    (v([x[0] + dx, x[1]]) - v([x[0] - dx, x[1]])) / (2.0 * dx),
                    (v([x[0], x[1] + dy]) - v([x[0], x[1] - dy])) / (2.0 * dy),
                ]
            }
        };

        Ok(IsaacsProblem {
            name: self.name.clone(),
            domain,
            alphas: control_set(&self.controls.alpha, "alpha")?,
            betas: control_set(&self.controls.beta, "beta")?,
            diffusion: Arc::new(move |x, t, al, be| a.eval(&vars(x, t, al, be))),
            advection: Arc::new(move |x, t, al, be| {
                let v = vars(x, t, al, be);
                [bx.eval(&v), by.eval(&v)]
            }),
            reaction: Arc::new(move |x, t, al, be| re.eval(&vars(x, t, al, be))),
            forcing: Arc::new(move |x, t, al, be| f.eval(&vars(x, t, al, be))),
            boundary: Arc::new(move |x, t| g.eval(&vars(x, t, 0.0, 0.0))),
            terminal: Arc::new(term_value),
            terminal_gradient: Arc::new(term_gradient),
            final_time: self.final_time,
            time_dependent,
            exact: exact.map(exact_from_expr),
            directional_advection: None,
            value_bounds: None,
        })
    }
}

fn exact_from_expr(e: Arc<Expr>) -> ExactSolution {
    let v = move |x: Point, t: f64| e.eval(&[x[0], x[1], t, 0.0, 0.0]);
    let value = v.clone();
    let gv = v.clone();
    let tv = v.clone();
    ExactSolution {
        value: Arc::new(value),
        gradient: Arc::new(move |x, t| {
            let (dx, dy) = (fd_step(x[0]), fd_step(x[1]));
            [
                (gv([x[0] + dx, x[1]], t) - gv([x[0] - dx, x[1]], t)) / (2.0 * dx),
                (gv([x[0], x[1] + dy], t) - gv([x[0], x[1] - dy], t)) / (2.0 * dy),
            ]
        }),
        time_derivative: Arc::new(move |x, t| {
            let dt = fd_step(t);
            (tv(x, t + dt) - tv(x, t - dt)) / (2.0 * dt)
        }),
        laplacian: Arc::new(move |x, t| {
            let d = 1e-3 * (1.0 + x[0].abs().max(x[1].abs()));
            (v([x[0] + d, x[1]], t) + v([x[0] - d, x[1]], t) + v([x[0], x[1] + d], t) + v([x[0], x[1] - d], t)
                - 4.0 * v(x, t))
                / (d * d)
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRIFT: &str = r#"
name = "drift"
final_time = 0.5

[domain]
kind = "triangle"
level = 2

[controls.alpha]
kind = "periodic"
start = 0.0
period = 6.283185307179586
count = 8

[controls.beta]
kind = "interval"
lower = 0.5
upper = 1.0
count = 2

[coefficients]
a = "beta * max(y, 0.1)"
b_x = "cos(alpha)"
b_y = "sin(alpha)"
g = "x + t"
terminal = "x^2"
exact = "x + y"
"#;

    #[test]
    fn loads_and_evaluates() {
        let p = load_problem_config(DRIFT, Path::new(".")).unwrap();
        assert_eq!(p.name, "drift");
        assert_eq!(p.final_time, 0.5);
        assert_eq!(p.alphas.len(), 8);
        assert_eq!(p.betas.values(), &[0.5, 1.0]);
        assert_eq!((p.diffusion)([0.0, 2.0], 0.0, 0.0, 0.5), 1.0);
        assert_eq!((p.reaction)([0.3, 2.0], 0.0, 0.0, 0.5), 0.0);
        assert!(p.time_dependent);
        let g = (p.terminal_gradient)([0.5, 0.0]);
        assert!((g[0] - 1.0).abs() < 1e-8 && g[1].abs() < 1e-8);
        let e = p.exact.unwrap();
        assert!(((e.laplacian)([0.2, 0.3], 0.1)).abs() < 1e-6);
        assert!(((e.gradient)([0.2, 0.3], 0.1)[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad_expr = DRIFT.replace("a = \"beta * max(y, 0.1)\"", "a = \"beta * \"");
        assert!(matches!(load_problem_config(&bad_expr, Path::new(".")), Err(ProblemError::Config(m)) if m.contains("'a'")));
        let bad_var = DRIFT.replace("terminal = \"x^2\"", "terminal = \"t\"");
        assert!(load_problem_config(&bad_var, Path::new(".")).is_err());
        let unknown = DRIFT.replace("name = \"drift\"", "name = \"drift\"\ncolour = 1");
        assert!(load_problem_config(&unknown, Path::new(".")).is_err());
    }
}
