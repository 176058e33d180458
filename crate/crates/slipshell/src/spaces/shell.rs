//! Clamped, θ-periodic shell basis: `{1, cos kθ, sin kθ} ⊗ ζ_j(z)` with
//! `ζ_j` the L²-orthonormalized bubbles `z²(L-z)² P_j(2z/L - 1)`.

use super::quadrature::SurfaceGrid;
use super::trig::{Parity, ShellField, ShellJet};
use crate::numerics::{pairwise_sum_by, Poly};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

/// One tensor-product basis function.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellMode {
    pub k: usize,
    pub parity: Parity,
    pub j: usize,
    /// z-profile in `s = 2z/L - 1`, θ-normalization included.
    pub profile: Poly,
    /// Diagonal bending energy `∫|∇²Y|²`, used for ordering.
    pub bending: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShellBasis {
    pub length: f64,
    pub n_theta: usize,
    pub n_z: usize,
    pub modes: Vec<ShellMode>,
}

/// L²(0, L)-orthonormal clamped z-profiles `ζ_0 .. ζ_{n-1}` in `s`.
pub fn clamped_profiles(length: f64, n: usize) -> Vec<Poly> {
    let bubble = Poly::from_coeffs(vec![1.0, 0.0, -2.0, 0.0, 1.0]);
    let inner = |a: &Poly, b: &Poly| a.mul(b).integral() * length / 2.0;
    let mut out: Vec<Poly> = Vec::with_capacity(n);
    for j in 0..n {
        let mut p = bubble.mul(&Poly::legendre(j));
        for _ in 0..2 {
            for q in &out {
                let c = inner(&p, q);
                p.add_scaled(q, -c);
            }
        }
        let nrm = inner(&p, &p).sqrt();
        out.push(p.scale(1.0 / nrm));
    }
    out
}

impl ShellBasis {
    /// Fourier modes `k = 0..=n_theta` (cos and sin for `k ≥ 1`) times
    /// `n_z` clamped profiles, sorted by bending energy.
    pub fn build(length: f64, n_theta: usize, n_z: usize) -> Self {
        assert!(n_theta >= 1 && n_z >= 1 && length > 0.0);
        let profiles = clamped_profiles(length, n_z);
        let dz = 2.0 / length;
        let mut modes = Vec::new();
        for k in 0..=n_theta {
            let norm = if k == 0 {
                1.0 / (2.0 * PI).sqrt()
            } else {
                1.0 / PI.sqrt()
            };
            for (j, zeta) in profiles.iter().enumerate() {
                let d1 = zeta.deriv();
                let d2 = d1.deriv();
                let half = length / 2.0;
                let i1 = d1.mul(&d1).integral() * half * dz * dz;
                let i2 = d2.mul(&d2).integral() * half * dz.powi(4);
                let kf = k as f64;
                let bending = kf.powi(4) + 2.0 * kf * kf * i1 + i2;
                let parities: &[Parity] = if k == 0 {
                    &[Parity::Cos]
                } else {
                    &[Parity::Cos, Parity::Sin]
                };
                for &parity in parities {
                    modes.push(ShellMode {
                        k,
                        parity,
                        j,
                        profile: zeta.scale(norm),
                        bending,
                    });
                }
            }
        }
        modes.sort_by(|a, b| {
            a.bending
                .partial_cmp(&b.bending)
                .unwrap()
                .then(a.k.cmp(&b.k))
                .then(a.parity.cmp(&b.parity))
                .then(a.j.cmp(&b.j))
        });
        ShellBasis {
            length,
            n_theta,
            n_z,
            modes,
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn field(&self, i: usize) -> ShellField {
        let m = &self.modes[i];
        ShellField::mode(self.length, m.k, m.parity, m.profile.clone())
    }

    /// `Σ c_i Y_i` as an exact field; extra coefficients beyond the basis
    /// length are rejected.
    pub fn combine(&self, coeffs: &[f64]) -> ShellField {
        assert!(coeffs.len() <= self.len());
        let mut f = ShellField::zero(self.length);
        for (i, c) in coeffs.iter().enumerate() {
            if *c != 0.0 {
                f.add_scaled(&self.field(i), *c);
            }
        }
        f
    }

    /// Per-mode jet tables on `grid`; `tables[i][node]`.
    pub fn tables(&self, grid: &SurfaceGrid) -> Vec<Vec<ShellJet>> {
        (0..self.len()).map(|i| self.field(i).eval_grid(grid)).collect()
    }

    /// Quadrature Gram matrix of the first `count` modes.
    pub fn gram(&self, grid: &SurfaceGrid, count: usize) -> DMatrix<f64> {
        let tabs: Vec<Vec<ShellJet>> = (0..count).map(|i| self.field(i).eval_grid(grid)).collect();
        let w = grid.weights();
        DMatrix::from_fn(count, count, |a, b| {
            pairwise_sum_by(0, w.len(), &|n| w[n] * tabs[a][n].value * tabs[b][n].value)
        })
    }

    /// L²-projection coefficients of nodal values onto the first `count`
    /// modes (least squares with the quadrature Gram matrix).
    pub fn project(&self, values: &[f64], grid: &SurfaceGrid, count: usize) -> Vec<f64> {
        let w = grid.weights();
        let tabs: Vec<Vec<ShellJet>> = (0..count).map(|i| self.field(i).eval_grid(grid)).collect();
        let rhs = DVector::from_fn(count, |a, _| {
            pairwise_sum_by(0, w.len(), &|n| w[n] * tabs[a][n].value * values[n])
        });
        let gram = self.gram(grid, count);
        let sol = gram
            .cholesky()
            .expect("shell Gram matrix is positive definite")
            .solve(&rhs);
        sol.iter().copied().collect()
    }
}

/// Shell displacement in coefficient form with its admissibility cap `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellDisplacement {
    pub coefficients: Vec<f64>,
    pub bound: f64,
}

impl ShellDisplacement {
    pub fn new(coefficients: Vec<f64>, bound: f64) -> Self {
        ShellDisplacement {
            coefficients,
            bound,
        }
    }

    pub fn field(&self, basis: &ShellBasis) -> ShellField {
        basis.combine(&self.coefficients)
    }

    pub fn jets(&self, basis: &ShellBasis, grid: &SurfaceGrid) -> Vec<ShellJet> {
        self.field(basis).eval_grid(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_are_clamped() {
        let basis = ShellBasis::build(2.0, 3, 5);
        for i in 0..basis.len() {
            let f = basis.field(i);
            for z in [0.0, 2.0] {
                for t in [0.0, 1.0, 4.0] {
                    let j = f.eval_jet(t, z);
                    assert!(j.value.abs() < 1e-14 && j.d_z.abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn basis_is_orthonormal_under_exact_quadrature() {
        let basis = ShellBasis::build(2.0, 3, 4);
        let grid = SurfaceGrid::gauss(2.0, 16, 12);
        let g = basis.gram(&grid, basis.len());
        for a in 0..basis.len() {
            for b in 0..basis.len() {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((g[(a, b)] - e).abs() < 1e-11, "({a},{b}) {}", g[(a, b)]);
            }
        }
    }

    #[test]
    fn modes_sorted_by_bending() {
        let basis = ShellBasis::build(2.0, 4, 6);
        assert_eq!(basis.len(), 9 * 6);
        for w in basis.modes.windows(2) {
            assert!(w[0].bending <= w[1].bending);
        }
    }

    #[test]
    fn projection_recovers_coefficients() {
        let basis = ShellBasis::build(2.0, 2, 3);
        let grid = SurfaceGrid::gauss(2.0, 12, 10);
        let coeffs: Vec<f64> = (0..basis.len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let vals: Vec<f64> = basis.combine(&coeffs).eval_grid(&grid).iter().map(|j| j.value).collect();
        let back = basis.project(&vals, &grid, basis.len());
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
