//! Tensor-product quadrature on the shell parameter domain `[0, 2π) × [0, L]`
//! and on the reference cylinder `(0, R) × [0, 2π) × (0, L)`.
//!
//! Node ordering is shared: a surface node `(θ_i, z_k)` has index
//! `i * nz + k`, and the volume node `(r_j, θ_i, z_k)` has index
//! `(i * nz + k) * nr + j`, so every surface node heads a radial column.

use crate::numerics::gauss_legendre;
use std::f64::consts::PI;

/// One-dimensional rule with positive weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Highest polynomial degree (or trigonometric frequency for periodic
    /// rules) integrated exactly.
    pub exact_degree: usize,
}

impl Rule1D {
    /// Trapezoid rule on the periodic interval `[0, 2π)`; exact for
    /// trigonometric polynomials of frequency below `n`.
    pub fn periodic(n: usize) -> Self {
        assert!(n >= 1);
        let h = 2.0 * PI / n as f64;
        Rule1D {
            nodes: (0..n).map(|j| j as f64 * h).collect(),
            weights: vec![h; n],
            exact_degree: n - 1,
        }
    }

    /// Composite Gauss–Legendre rule with `order` points in each of `cells`
    /// equal cells; `order = 1` is the midpoint rule.
    pub fn composite_gauss(a: f64, b: f64, cells: usize, order: usize) -> Self {
        assert!(cells >= 1 && order >= 1 && b > a);
        let (x, w) = gauss_legendre(order);
        let h = (b - a) / cells as f64;
        let mut nodes = Vec::with_capacity(cells * order);
        let mut weights = Vec::with_capacity(cells * order);
        for c in 0..cells {
            let left = a + c as f64 * h;
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(left + 0.5 * h * (xi + 1.0));
                weights.push(0.5 * h * wi);
            }
        }
        Rule1D {
            nodes,
            weights,
            exact_degree: 2 * order - 1,
        }
    }

    pub fn midpoint(a: f64, b: f64, cells: usize) -> Self {
        Self::composite_gauss(a, b, cells, 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .collect();
        crate::numerics::pairwise_sum(&vals)
    }
}

/// Quadrature on `ω = [0, 2π) × [0, L]` with the flat measure `dθ dz`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceGrid {
    pub theta: Rule1D,
    pub z: Rule1D,
}

impl SurfaceGrid {
    pub fn new(theta: Rule1D, z: Rule1D) -> Self {
        SurfaceGrid { theta, z }
    }

    /// Spectrally accurate default: `n_theta` trapezoid nodes and one
    /// Gauss–Legendre panel of `n_z` points.
    pub fn gauss(length: f64, n_theta: usize, n_z: usize) -> Self {
        SurfaceGrid {
            theta: Rule1D::periodic(n_theta),
            z: Rule1D::composite_gauss(0.0, length, 1, n_z),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i_theta: usize, i_z: usize) -> usize {
        i_theta * self.z.len() + i_z
    }

    /// `(θ, z)` of node `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let nz = self.z.len();
        (self.theta.nodes[idx / nz], self.z.nodes[idx % nz])
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        let nz = self.z.len();
        self.theta.weights[idx / nz] * self.z.weights[idx % nz]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }
}

/// Quadrature on the reference cylinder with parameter measure
/// `dr dθ dz`; the reference volume element is `r` times it.
#[derive(Clone, Debug, PartialEq)]
pub struct VolumeGrid {
    pub r: Rule1D,
    pub theta: Rule1D,
    pub z: Rule1D,
}

impl VolumeGrid {
    pub fn new(r: Rule1D, theta: Rule1D, z: Rule1D) -> Self {
        VolumeGrid { r, theta, z }
    }

    /// Cell-centred grid with `nr × ntheta × nz` nodes on radius `radius`
    /// and length `length`.
    pub fn midpoint(radius: f64, length: f64, nr: usize, ntheta: usize, nz: usize) -> Self {
        VolumeGrid {
            r: Rule1D::midpoint(0.0, radius, nr),
            theta: Rule1D::periodic(ntheta),
            z: Rule1D::midpoint(0.0, length, nz),
        }
    }

    pub fn len(&self) -> usize {
        self.r.len() * self.theta.len() * self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Surface grid sharing the `(θ, z)` nodes of this volume grid.
    pub fn surface(&self) -> SurfaceGrid {
        SurfaceGrid {
            theta: self.theta.clone(),
            z: self.z.clone(),
        }
    }

    #[inline]
    pub fn index(&self, i_r: usize, i_theta: usize, i_z: usize) -> usize {
        (i_theta * self.z.len() + i_z) * self.r.len() + i_r
    }

    /// `(i_r, column)` where `column` is the matching surface node index.
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        let nr = self.r.len();
        (idx % nr, idx / nr)
    }

    /// `(r, θ, z)` of node `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64, f64) {
        let nr = self.r.len();
        let nz = self.z.len();
        let ir = idx % nr;
        let col = idx / nr;
        (
            self.r.nodes[ir],
            self.theta.nodes[col / nz],
            self.z.nodes[col % nz],
        )
    }

    /// Parameter weight `w_r w_θ w_z` (no metric factor).
    #[inline]
    pub fn param_weight(&self, idx: usize) -> f64 {
        let nr = self.r.len();
        let nz = self.z.len();
        let ir = idx % nr;
        let col = idx / nr;
        self.r.weights[ir] * self.theta.weights[col / nz] * self.z.weights[col % nz]
    }

    /// Reference volume weight `r w_r w_θ w_z`.
    #[inline]
    pub fn reference_weight(&self, idx: usize) -> f64 {
        let (r, _, _) = self.point(idx);
        r * self.param_weight(idx)
    }
}

/// Quadrature on the end disks `{z = 0}` and `{z = L}` with parameter
/// measure `dr dθ`; the area element is `r dr dθ` at rest.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskGrid {
    pub r: Rule1D,
    pub theta: Rule1D,
}

impl DiskGrid {
    pub fn len(&self) -> usize {
        self.r.len() * self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index ordering `i_theta * nr + i_r`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let nr = self.r.len();
        (self.r.nodes[idx % nr], self.theta.nodes[idx / nr])
    }

    #[inline]
    pub fn param_weight(&self, idx: usize) -> f64 {
        let nr = self.r.len();
        self.r.weights[idx % nr] * self.theta.weights[idx / nr]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_rule_is_exact_below_its_frequency() {
        let rule = Rule1D::periodic(16);
        for k in 0..16 {
            let c = rule.integrate(|t| (k as f64 * t).cos());
            let s = rule.integrate(|t| (k as f64 * t).sin());
            let exact = if k == 0 { 2.0 * PI } else { 0.0 };
            assert!((c - exact).abs() < 1e-12, "k={k}");
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn composite_gauss_is_exact_to_its_degree() {
        let rule = Rule1D::composite_gauss(0.0, 2.0, 3, 4);
        for deg in 0..=rule.exact_degree {
            let q = rule.integrate(|x| x.powi(deg as i32));
            let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
            assert!(((q - exact) / exact).abs() < 1e-12, "deg={deg}");
        }
    }

    #[test]
    fn volume_index_round_trips() {
        let g = VolumeGrid::midpoint(1.0, 2.0, 3, 4, 5);
        for ir in 0..3 {
            for it in 0..4 {
                for iz in 0..5 {
                    let idx = g.index(ir, it, iz);
                    let (r, t, z) = g.point(idx);
                    assert_eq!(r, g.r.nodes[ir]);
                    assert_eq!(t, g.theta.nodes[it]);
                    assert_eq!(z, g.z.nodes[iz]);
                    assert_eq!(g.split(idx), (ir, g.surface().index(it, iz)));
                }
            }
        }
    }

    #[test]
    fn reference_volume_of_cylinder() {
        let g = VolumeGrid::new(
            Rule1D::composite_gauss(0.0, 1.0, 2, 2),
            Rule1D::periodic(8),
            Rule1D::composite_gauss(0.0, 2.0, 1, 2),
        );
        let vol: f64 = (0..g.len()).map(|i| g.reference_weight(i)).sum();
        assert!((vol - 2.0 * PI).abs() < 1e-12);
    }
}
