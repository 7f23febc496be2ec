//! Shared fixtures: random two-node Isaacs systems and a brute-force oracle.

#![allow(dead_code)]

use isaacs_fem::assembly::OperatorFamily;
use rand::{Rng, RngExt};

/// One control pair of a two-node system: `(E, I, F)`.
pub type DensePair = ([[f64; 2]; 2], [[f64; 2]; 2], [f64; 2]);

/// Two interior nodes, two `α` and two `β` controls, pairs in
/// `beta * 2 + alpha` order.
#[derive(Debug, Clone)]
pub struct TwoNodeSystem {
    pub pairs: [DensePair; 4],
    pub w: [f64; 2],
    pub h: f64,
}

impl TwoNodeSystem {
    pub fn random(rng: &mut impl Rng) -> Self {
        let h = rng.random_range(0.05..1.0);
        let mut pair = || {
            let mut e = [[0.0; 2]; 2];
            let mut i = [[0.0; 2]; 2];
            for r in 0..2 {
                let c = 1 - r;
                e[r][r] = rng.random_range(0.0..1.0 / h);
                e[r][c] = rng.random_range(-1.0..0.0);
                i[r][r] = rng.random_range(0.1..3.0);
                i[r][c] = -rng.random_range(0.0..0.95) * i[r][r];
            }
            let f = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            (e, i, f)
        };
        let pairs = [pair(), pair(), pair(), pair()];
        let w = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        Self { pairs, w, h }
    }

    pub fn family(&self) -> OperatorFamily {
        let dense = self
            .pairs
            .iter()
            .map(|(e, i, f)| (e.iter().map(|r| r.to_vec()).collect(), i.iter().map(|r| r.to_vec()).collect(), f.to_vec()))
            .collect();
        OperatorFamily::from_dense(2, 2, 2, dense).unwrap()
    }

    /// `Ψ` of `pair` on `row` at `u`.
    pub fn psi(&self, pair: usize, row: usize, u: [f64; 2]) -> f64 {
        let (e, i, f) = &self.pairs[pair];
        let h = self.h;
        let iu = i[row][0] * u[0] + i[row][1] * u[1];
        let ew = e[row][0] * self.w[0] + e[row][1] * self.w[1];
        h * iu + u[row] + h * ew - self.w[row] - h * f[row]
    }

    /// Solution of `Ψ = 0` when row `r` uses pair `choice[r]`, by Cramer's rule.
    pub fn solve_policy(&self, choice: [usize; 2]) -> [f64; 2] {
        let h = self.h;
        let mut a = [[0.0; 2]; 2];
        let mut b = [0.0; 2];
        for r in 0..2 {
            let (e, i, f) = &self.pairs[choice[r]];
            for c in 0..2 {
                a[r][c] = h * i[r][c] + if r == c { 1.0 } else { 0.0 };
            }
            b[r] = self.w[r] - h * (e[r][0] * self.w[0] + e[r][1] * self.w[1]) + h * f[r];
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [(b[0] * a[1][1] - a[0][1] * b[1]) / det, (a[0][0] * b[1] - b[0] * a[1][0]) / det]
    }

    /// Enumerates all 16 node-wise policies: for each `β` policy the
    /// smallest solution over `α` policies, then the largest over `β`.
    pub fn brute_force(&self) -> [f64; 2] {
        let mut best = [f64::NEG_INFINITY; 2];
        for beta in [[0, 0], [0, 1], [1, 0], [1, 1]] {
            let mut inner = [f64::INFINITY; 2];
            for alpha in [[0, 0], [0, 1], [1, 0], [1, 1]] {
                let u = self.solve_policy([beta[0] * 2 + alpha[0], beta[1] * 2 + alpha[1]]);
                inner = [inner[0].min(u[0]), inner[1].min(u[1])];
            }
            best = [best[0].max(inner[0]), best[1].max(inner[1])];
        }
        best
    }

    /// `max_r |min_β max_α Ψ(u)_r|`.
    pub fn infsup_residual(&self, u: [f64; 2]) -> f64 {
        (0..2)
            .map(|r| {
                let v = (0..2)
                    .map(|b| (0..2).map(|a| self.psi(b * 2 + a, r, u)).fold(f64::NEG_INFINITY, f64::max))
                    .fold(f64::INFINITY, f64::min);
                v.abs()
            })
            .fold(0.0, f64::max)
    }
}
