use std::f64::consts::PI;
use std::sync::Arc;

use super::{ControlSet, Domain, IsaacsProblem};

/// Pursuit-evasion game in the pursuer's frame on the annulus `r <= |x| <= R`.
///
/// `a = max{x₂, 0.1}`, `b = (4 sin β - 0.5 sin α, cos β - cos α)`, `c = f = 0`;
/// `v = 1` on the outer circle and at `t = T`, `v = 0` on the inner circle.
#[derive(Debug, Clone, PartialEq)]
pub struct TagChase {
    pub r: f64,
    pub big_r: f64,
    pub final_time: f64,
    pub n_alpha: usize,
    pub n_beta: usize,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl Default for TagChase {
    fn default() -> Self {
        Self {
            r: 0.5,
            big_r: 2.0,
            final_time: 1.0,
            n_alpha: 16,
            n_beta: 16,
            n_radial: 16,
            n_angular: 64,
        }
    }
}

pub fn tag_chase() -> IsaacsProblem {
    TagChase::default().build()
}

impl TagChase {
    pub fn build(&self) -> IsaacsProblem {
        let (r, big_r) = (self.r, self.big_r);
        // harmonic in the annulus, 0 on the inner and 1 on the outer circle
        let g = move |x: [f64; 2]| (x[0].hypot(x[1]) / r).ln() / (big_r / r).ln();
        IsaacsProblem {
            name: "tag-chase".into(),
            domain: Domain::Annulus {
                r,
                big_r,
                n_radial: self.n_radial,
                n_angular: self.n_angular,
            },
            alphas: ControlSet::periodic(-PI, 2.0 * PI, self.n_alpha),
            betas: ControlSet::periodic(-PI, 2.0 * PI, self.n_beta),
            diffusion: Arc::new(|x, _, _, _| x[1].max(0.1)),
            advection: Arc::new(|_, _, alpha, beta| [4.0 * beta.sin() - 0.5 * alpha.sin(), beta.cos() - alpha.cos()]),
            reaction: Arc::new(|_, _, _, _| 0.0),
            forcing: Arc::new(|_, _, _, _| 0.0),
            boundary: Arc::new(move |x, _| g(x)),
            terminal: Arc::new(|_| 1.0),
            terminal_gradient: Arc::new(|_| [0.0, 0.0]),
            final_time: self.final_time,
            time_dependent: false,
            exact: None,
            directional_advection: None,
            value_bounds: Some((0.0, 1.0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::validate_problem;

    #[test]
    fn coefficient_values() {
        let p = tag_chase();
        assert_eq!((p.advection)([0.3, 0.3], 0.0, 0.0, 0.0), [0.0, 0.0]);
        assert_eq!((p.diffusion)([0.0, -1.0], 0.0, 0.0, 0.0), 0.1);
        assert_eq!((p.diffusion)([0.0, 0.5], 0.0, 0.0, 0.0), 0.5);
        let horizontal = (p.advection)([0.0, 0.0], 0.0, -PI / 2.0, PI / 2.0);
        assert!((horizontal[0] - 4.5).abs() < 1e-15);
    }

    #[test]
    fn boundary_data() {
        let p = tag_chase();
        assert!(((p.boundary)([2.0, 0.0], 0.0) - 1.0).abs() < 1e-15);
        assert!((p.boundary)([0.0, -0.5], 0.0).abs() < 1e-15);
    }

    #[test]
    fn validation_flags_inner_circle() {
        let p = tag_chase();
        let mesh = p.domain.build_mesh().unwrap();
        let report = validate_problem(&p, &mesh, 200, 3);
        assert!(report.is_clean());
        assert_eq!(report.boundary_mismatches.len(), 64);
        for m in &report.boundary_mismatches {
            assert!((m.point[0].hypot(m.point[1]) - 0.5).abs() < 1e-12);
        }
    }
}
