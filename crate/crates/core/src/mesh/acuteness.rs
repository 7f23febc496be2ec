use super::{dot, norm, Mesh};

/// Element and local vertex pair attaining the acuteness bound, with the
/// corresponding (internal) node indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorstPair {
    pub element: usize,
    pub local: (usize, usize),
    pub nodes: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcutenessReport {
    /// Largest angle `theta` with `∇φ_a·∇φ_b <= -sin(theta)|∇φ_a||∇φ_b|` on
    /// every element, in radians.
    pub theta: f64,
    pub worst_pair: WorstPair,
    pub is_strictly_acute: bool,
}

impl AcutenessReport {
    pub fn theta_degrees(&self) -> f64 {
        self.theta.to_degrees()
    }
}

/// Measures how strictly acute the mesh is.
///
/// All distinct local vertex pairs are checked, including pairs that involve
/// boundary nodes.
pub fn check_strict_acuteness(mesh: &Mesh) -> AcutenessReport {
    let mut best = f64::INFINITY;
    let mut worst_pair = WorstPair {
        element: 0,
        local: (0, 1),
        nodes: (mesh.triangles()[0][0], mesh.triangles()[0][1]),
    };
    for k in 0..mesh.n_triangles() {
        let g = mesh.hat_gradients(k);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let s = -dot(g[a], g[b]) / (norm(g[a]) * norm(g[b]));
            if s < best {
                best = s;
                let tri = mesh.triangles()[k];
                worst_pair = WorstPair {
                    element: k,
                    local: (a, b),
                    nodes: (tri[a], tri[b]),
                };
            }
        }
    }
    let theta = best.clamp(-1.0, 1.0).asin();
    AcutenessReport {
        theta,
        worst_pair,
        is_strictly_acute: theta > 0.0,
    }
}
