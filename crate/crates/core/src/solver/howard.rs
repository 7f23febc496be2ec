//! Howard's method for one time step.
//!
//! Given `w = v(s^{k+1})`, find `u` with
//! `min_β max_α Ψ^{(α,β)}(u, w) = 0` row by row, where
//! `Ψ^{(α,β)}(u, w) = (hI + Id)u + (hE - Id)w - hF`. The inner loop improves
//! the maximizing policy `α` for frozen `β`, the outer loop improves `β`.

use rayon::prelude::*;

use crate::assembly::{max_alpha_row, minmax_row, OperatorFamily};
use crate::error::SolverError;
use crate::linalg::SparseLu;
use crate::sparse::max_abs;

/// Tolerance used by the inner loop at each outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum EtaSchedule {
    /// Always `eta`.
    #[default]
    Constant,
    /// `max(initial · ratio^j, eta)` at outer iteration `j`.
    Geometric { initial: f64, ratio: f64 },
}

impl EtaSchedule {
    pub fn inner_tolerance(&self, eta: f64, outer: usize) -> f64 {
        match *self {
            Self::Constant => eta,
            Self::Geometric { initial, ratio } => (initial * ratio.powi(outer as i32)).max(eta),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HowardConfig {
    pub eta: f64,
    pub eta_schedule: EtaSchedule,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Residual tolerance of each linear solve.
    pub linear_tol: f64,
}

impl Default for HowardConfig {
    fn default() -> Self {
        Self {
            eta: 1e-10,
            eta_schedule: EtaSchedule::Constant,
            max_inner: 100,
            max_outer: 50,
            linear_tol: 1e-12,
        }
    }
}

impl HowardConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.eta > 0.0) {
            return Err(SolverError::Config("eta must be positive".into()));
        }
        if !(self.linear_tol > 0.0) {
            return Err(SolverError::Config("linear solver tolerance must be positive".into()));
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err(SolverError::Config("iteration caps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Node-wise control indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl Policy {
    /// First control everywhere.
    pub fn first(n: usize) -> Self {
        Self {
            alpha: vec![0; n],
            beta: vec![0; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HowardStats {
    /// Inner iterations summed over all outer iterations.
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    /// `||min_β max_α Ψ(u, w)||_∞` at the returned iterate.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HowardSolution {
    pub u: Vec<f64>,
    pub policy: Policy,
    pub stats: HowardStats,
}

/// `Ψ^{(α,β)}(u, w)` for pair index `pair`.
pub fn psi(family: &OperatorFamily, pair: usize, u: &[f64], w: &[f64], h: f64) -> Result<Vec<f64>, SolverError> {
    family.check_dim(u.len())?;
    family.check_dim(w.len())?;
    Ok((0..family.dim()).map(|row| family.psi_row(pair, row, u, w, h)).collect())
}

/// Solves `Ψ^{(α,β)}(u, w) = 0` for `u`.
pub fn phi(family: &OperatorFamily, pair: usize, w: &[f64], h: f64, tol: f64) -> Result<Vec<f64>, SolverError> {
    family.check_dim(w.len())?;
    let lu = SparseLu::new(family.pattern().clone())?;
    let n = family.dim();
    let policy = vec![pair; n];
    let c = row_constants(family, &policy, w, h);
    solve_policy(family, &lu, &policy, &c, h, tol)
}

/// `h(E w)_ℓ - w_ℓ - h F_ℓ` of the pair selected on each row.
fn row_constants(family: &OperatorFamily, pairs: &[usize], w: &[f64], h: f64) -> Vec<f64> {
    let p = family.pattern();
    pairs
        .iter()
        .enumerate()
        .map(|(row, &pair)| {
            let op = family.pair(pair);
            h * p.row_dot(&op.explicit, row, w) - w[row] - h * op.load[row]
        })
        .collect()
}

/// Solves `(hI_π + Id)u = -c` for the row-wise selected pairs `π`.
fn solve_policy(
    family: &OperatorFamily,
    lu: &SparseLu,
    pairs: &[usize],
    c: &[f64],
    h: f64,
    tol: f64,
) -> Result<Vec<f64>, SolverError> {
    let p = family.pattern();
    let mut values = vec![0.0; p.nnz()];
    for (row, &pair) in pairs.iter().enumerate() {
        let range = p.row_range(row);
        let src = &family.pair(pair).implicit[range.clone()];
        for (dst, s) in values[range].iter_mut().zip(src) {
            *dst = h * s;
        }
        values[p.diag_pos(row)] += 1.0;
    }
    let rhs: Vec<f64> = c.iter().map(|v| -v).collect();
    Ok(lu.solve(&values, &rhs, tol)?)
}

/// Runs Howard's method for one time step.
///
/// `lu` must be built on `family.pattern()`. Without `initial`, every node
/// starts from the first control pair. Hitting an iteration cap returns the
/// last iterate with `stats.converged == false`.
pub fn howard_solve_step(
    family: &OperatorFamily,
    w: &[f64],
    h: f64,
    config: &HowardConfig,
    initial: Option<&Policy>,
    lu: &SparseLu,
) -> Result<HowardSolution, SolverError> {
    config.validate()?;
    family.check_dim(w.len())?;
    let n = family.dim();
    let mut policy = match initial {
        Some(p) if p.alpha.len() == n && p.beta.len() == n => p.clone(),
        Some(p) => {
            return Err(SolverError::Dimension {
                expected: n,
                got: p.alpha.len(),
            })
        }
        None => Policy::first(n),
    };
    let mut stats = HowardStats::default();
    let mut u;
    loop {
        // inner loop: maximize over α with β frozen
        let tol = config.eta_schedule.inner_tolerance(config.eta, stats.outer_iterations);
        let mut inner = 0;
        loop {
            let pairs: Vec<usize> = (0..n)
                .map(|row| family.pair_index(policy.alpha[row], policy.beta[row]))
                .collect();
            let c = row_constants(family, &pairs, w, h);
            u = solve_policy(family, lu, &pairs, &c, h, config.linear_tol)?;
            inner += 1;
            let improved: Vec<(f64, usize)> = (0..n)
                .into_par_iter()
                .map(|row| max_alpha_row(family, row, policy.beta[row], &u, w, h))
                .collect();
            let residual = improved.iter().fold(0.0f64, |m, (v, _)| m.max(v.abs()));
            if residual < tol || inner >= config.max_inner {
                break;
            }
            for (row, (_, alpha)) in improved.into_iter().enumerate() {
                policy.alpha[row] = alpha;
            }
        }
        stats.inner_iterations += inner;
        stats.outer_iterations += 1;

        // outer step: minimize over β
        let evaluated: Vec<(f64, usize, usize)> = (0..n)
            .into_par_iter()
            .map(|row| minmax_row(family, row, &u, w, h))
            .collect();
        stats.residual = evaluated.iter().fold(0.0f64, |m, (v, _, _)| m.max(v.abs()));
        for (row, (_, beta, alpha)) in evaluated.into_iter().enumerate() {
            policy.beta[row] = beta;
            policy.alpha[row] = alpha;
        }
        if stats.residual < config.eta {
            stats.converged = true;
            break;
        }
        if stats.outer_iterations >= config.max_outer {
            break;
        }
    }
    Ok(HowardSolution { u, policy, stats })
}

/// `||min_β max_α Ψ(u, w)||_∞`.
pub fn infsup_residual_norm(family: &OperatorFamily, u: &[f64], w: &[f64], h: f64) -> f64 {
    let r: Vec<f64> = (0..family.dim())
        .into_par_iter()
        .map(|row| minmax_row(family, row, u, w, h).0)
        .collect();
    max_abs(&r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_family() -> OperatorFamily {
        OperatorFamily::from_dense(1, 1, 1, vec![(vec![vec![0.0]], vec![vec![2.0]], vec![3.0])]).unwrap()
    }

    #[test]
    fn scalar_psi_and_phi() {
        let f = scalar_family();
        assert_eq!(psi(&f, 0, &[1.0], &[0.0], 1.0).unwrap(), vec![0.0]);
        assert_eq!(psi(&f, 0, &[0.0], &[0.0], 1.0).unwrap(), vec![-3.0]);
        let u = phi(&f, 0, &[0.0], 1.0, 1e-14).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15);
        assert!(psi(&f, 0, &[0.0, 1.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn zero_data_gives_zero() {
        let f = OperatorFamily::from_dense(
            2,
            1,
            1,
            vec![(vec![vec![1.0, -0.5], vec![-0.5, 1.0]], vec![vec![2.0, -1.0], vec![-1.0, 2.0]], vec![0.0; 2])],
        )
        .unwrap();
        assert_eq!(phi(&f, 0, &[0.0, 0.0], 0.3, 1e-14).unwrap(), vec![0.0, 0.0]);
        assert_eq!(psi(&f, 0, &[0.0; 2], &[0.0; 2], 0.3).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn boundary_row_is_a_fixed_point() {
        // row 1 is a boundary row: E = 0, I = identity, F = g
        let g = 0.7;
        let f = OperatorFamily::from_dense(
            1,
            1,
            1,
            vec![(vec![vec![0.5, -0.5], vec![0.0, 0.0]], vec![vec![1.0, -1.0], vec![0.0, 1.0]], vec![0.0, g])],
        )
        .unwrap();
        let u = phi(&f, 0, &[0.2, g], 0.25, 1e-14).unwrap();
        assert!((u[1] - g).abs() < 1e-15);
    }

    #[test]
    fn single_pair_takes_one_pass() {
        let f = scalar_family();
        let lu = SparseLu::new(f.pattern().clone()).unwrap();
        let s = howard_solve_step(&f, &[0.0], 1.0, &HowardConfig::default(), None, &lu).unwrap();
        assert_eq!(s.stats.inner_iterations, 1);
        assert_eq!(s.stats.outer_iterations, 1);
        assert!(s.stats.converged);
        assert!((s.u[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn caps_flag_nonconvergence() {
        // two β controls with different fixed points need a second outer pass
        let f = OperatorFamily::from_dense(
            1,
            1,
            2,
            vec![
                (vec![vec![0.0]], vec![vec![1.0]], vec![1.0]),
                (vec![vec![0.0]], vec![vec![1.0]], vec![2.0]),
            ],
        )
        .unwrap();
        let lu = SparseLu::new(f.pattern().clone()).unwrap();
        let config = HowardConfig {
            max_outer: 1,
            ..HowardConfig::default()
        };
        let s = howard_solve_step(&f, &[0.0], 1.0, &config, None, &lu).unwrap();
        assert!(!s.stats.converged);
        let s = howard_solve_step(&f, &[0.0], 1.0, &HowardConfig::default(), None, &lu).unwrap();
        assert!(s.stats.converged);
        // Ψ_β(u) = 2u - F_β, so min_β Ψ_β(u) = 0 picks the larger load
        assert!((s.u[0] - 1.0).abs() < 1e-14);
        assert_eq!(s.policy.beta, vec![1]);
    }

    #[test]
    fn geometric_schedule_is_floored() {
        let s = EtaSchedule::Geometric { initial: 1e-4, ratio: 0.5 };
        assert_eq!(s.inner_tolerance(1e-10, 0), 1e-4);
        assert_eq!(s.inner_tolerance(1e-10, 100), 1e-10);
        assert_eq!(EtaSchedule::Constant.inner_tolerance(1e-10, 3), 1e-10);
    }
}
