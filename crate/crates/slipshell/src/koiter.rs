//! Shell elasticity: the linear bending energy and the nonlinear Koiter
//! energy with its change-of-metric and change-of-curvature tensors.
//!
//! Symmetric 2×2 tensors on `ω` are stored as `[T_θθ, T_zz, T_θz]`.
//!
//! Factor conventions:
//! - `K(η, ξ) = (h/6)∫𝒜G(η):G'(η)ξ + (h³/48)∫𝒜R♯(η):R♯'(η)ξ`, so that
//!   `d/ds K(η + sξ)|₀ = 2 K(η, ξ)` and `d/dt ½K(η) = K(η, ∂_t η)`.
//! - For frozen `δ`, `K_δ(η)` is quadratic in `η`, and
//!   `K_δ(η, ξ) := ½ d/ds K_δ(η + sξ)|₀`.

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum_by;
use crate::spaces::{ShellJet, SurfaceGrid};
use serde::{Deserialize, Serialize};

pub type Sym2 = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ShellModel {
    #[default]
    Linear,
    NonlinearKoiter,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MetricConvention {
    /// `G_zz = 1 + (∂_z η)²`
    #[default]
    AsPrinted,
    /// `G_zz = (∂_z η)²`
    VanishingAtZero,
}

impl MetricConvention {
    fn offset(self) -> f64 {
        match self {
            MetricConvention::AsPrinted => 1.0,
            MetricConvention::VanishingAtZero => 0.0,
        }
    }
}

/// Fourth-order shell elasticity acting on symmetric 2×2 tensors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElasticityTensor {
    ScaledIdentity(f64),
    Isotropic { lambda: f64, mu: f64 },
}

impl ElasticityTensor {
    #[inline]
    pub fn apply(&self, t: &Sym2) -> Sym2 {
        match *self {
            ElasticityTensor::ScaledIdentity(c) => [c * t[0], c * t[1], c * t[2]],
            ElasticityTensor::Isotropic { lambda, mu } => {
                let tr = lambda * (t[0] + t[1]);
                [tr + 2.0 * mu * t[0], tr + 2.0 * mu * t[1], 2.0 * mu * t[2]]
            }
        }
    }

    /// `𝒜a : b` with the full double contraction.
    #[inline]
    pub fn pair(&self, a: &Sym2, b: &Sym2) -> f64 {
        let aa = self.apply(a);
        contract(&aa, b)
    }

    /// Matrix of `T ↦ 𝒜T` on `(T_θθ, T_zz, √2 T_θz)`.
    pub fn voigt(&self) -> nalgebra::Matrix3<f64> {
        match *self {
            ElasticityTensor::ScaledIdentity(c) => nalgebra::Matrix3::identity() * c,
            ElasticityTensor::Isotropic { lambda, mu } => nalgebra::Matrix3::new(
                lambda + 2.0 * mu,
                lambda,
                0.0,
                lambda,
                lambda + 2.0 * mu,
                0.0,
                0.0,
                0.0,
                2.0 * mu,
            ),
        }
    }

    /// Smallest Voigt eigenvalue; `𝒜T:T ≥ c|T|²` with this `c`.
    pub fn coercivity(&self) -> f64 {
        self.voigt().symmetric_eigenvalues().min()
    }
}

#[inline]
pub fn contract(a: &Sym2, b: &Sym2) -> f64 {
    a[0] * b[0] + a[1] * b[1] + 2.0 * a[2] * b[2]
}

/// Change of metric `G(η)`.
#[inline]
pub fn metric_tensor(eta: &ShellJet, radius: f64, conv: MetricConvention) -> Sym2 {
    let s = radius + eta.value;
    [
        s * s + eta.d_theta * eta.d_theta - radius * radius,
        conv.offset() + eta.d_z * eta.d_z,
        eta.d_theta * eta.d_z,
    ]
}

/// Change of curvature `R♯(η)`.
#[inline]
pub fn curvature_tensor(eta: &ShellJet, radius: f64) -> Sym2 {
    let g = 1.0 + eta.value / radius;
    let s = radius + eta.value;
    [
        g * eta.d_tt - s * s / radius - 2.0 * eta.d_theta * eta.d_theta / radius + radius,
        g * eta.d_zz,
        g * eta.d_tz - eta.d_theta * eta.d_z / radius,
    ]
}

/// Fréchet derivative `G'(η)ξ`.
#[inline]
pub fn metric_direction(eta: &ShellJet, xi: &ShellJet, radius: f64) -> Sym2 {
    [
        2.0 * (radius + eta.value) * xi.value + 2.0 * eta.d_theta * xi.d_theta,
        2.0 * eta.d_z * xi.d_z,
        xi.d_theta * eta.d_z + eta.d_theta * xi.d_z,
    ]
}

/// Fréchet derivative `R♯'(η)ξ`.
#[inline]
pub fn curvature_direction(eta: &ShellJet, xi: &ShellJet, radius: f64) -> Sym2 {
    let g = 1.0 + eta.value / radius;
    [
        xi.value / radius * eta.d_tt + g * xi.d_tt
            - 2.0 * (radius + eta.value) * xi.value / radius
            - 4.0 * eta.d_theta * xi.d_theta / radius,
        xi.value / radius * eta.d_zz + g * xi.d_zz,
        xi.value / radius * eta.d_tz + g * xi.d_tz - (xi.d_theta * eta.d_z + eta.d_theta * xi.d_z) / radius,
    ]
}

/// Linearized metric `G_δ(η)`.
#[inline]
pub fn linearized_metric(delta: &ShellJet, eta: &ShellJet, radius: f64, conv: MetricConvention) -> Sym2 {
    [
        (radius + delta.value) * (radius + eta.value) + delta.d_theta * eta.d_theta - radius * radius,
        conv.offset() + delta.d_z * eta.d_z,
        0.5 * (delta.d_theta * eta.d_z + eta.d_theta * delta.d_z),
    ]
}

/// Linearized curvature `R♯_δ(η)`.
#[inline]
pub fn linearized_curvature(delta: &ShellJet, eta: &ShellJet, radius: f64) -> Sym2 {
    let g = 1.0 + delta.value / radius;
    [
        g * eta.d_tt - (radius + eta.value) * (radius + delta.value) / radius
            - 2.0 * delta.d_theta * eta.d_theta / radius
            + radius,
        g * eta.d_zz,
        g * eta.d_tz - 0.5 * (delta.d_theta * eta.d_z + eta.d_theta * delta.d_z) / radius,
    ]
}

/// Linear part `G_δ(ξ) - G_δ(0)`.
#[inline]
pub fn linearized_metric_direction(delta: &ShellJet, xi: &ShellJet, radius: f64) -> Sym2 {
    [
        (radius + delta.value) * xi.value + delta.d_theta * xi.d_theta,
        delta.d_z * xi.d_z,
        0.5 * (delta.d_theta * xi.d_z + xi.d_theta * delta.d_z),
    ]
}

/// Linear part `R♯_δ(ξ) - R♯_δ(0)`.
#[inline]
pub fn linearized_curvature_direction(delta: &ShellJet, xi: &ShellJet, radius: f64) -> Sym2 {
    let g = 1.0 + delta.value / radius;
    [
        g * xi.d_tt - (radius + delta.value) * xi.value / radius - 2.0 * delta.d_theta * xi.d_theta / radius,
        g * xi.d_zz,
        g * xi.d_tz - 0.5 * (delta.d_theta * xi.d_z + xi.d_theta * delta.d_z) / radius,
    ]
}

/// Material and geometric data of the Koiter model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Koiter {
    pub tensor: ElasticityTensor,
    pub thickness: f64,
    pub radius: f64,
    pub convention: MetricConvention,
}

fn guard(jets: &[ShellJet], radius: f64) -> Result<()> {
    for j in jets {
        if !(1.0 + j.value / radius > 0.0) {
            return Err(Error::ContactViolation {
                sup_abs: j.value.abs(),
                radius,
            });
        }
    }
    Ok(())
}

impl Koiter {
    fn membrane(&self) -> f64 {
        self.thickness / 6.0
    }

    fn bending(&self) -> f64 {
        self.thickness.powi(3) / 48.0
    }

    fn integrate(&self, grid: &SurfaceGrid, f: &dyn Fn(usize) -> f64) -> f64 {
        pairwise_sum_by(0, grid.len(), &|i| grid.weight(i) * f(i))
    }

    /// `K(η)`.
    pub fn energy(&self, eta: &[ShellJet], grid: &SurfaceGrid) -> Result<f64> {
        guard(eta, self.radius)?;
        let (a, b) = (self.membrane(), self.bending());
        Ok(self.integrate(grid, &|i| {
            let g = metric_tensor(&eta[i], self.radius, self.convention);
            let r = curvature_tensor(&eta[i], self.radius);
            a * self.tensor.pair(&g, &g) + b * self.tensor.pair(&r, &r)
        }))
    }

    /// `K(η, ξ)`.
    pub fn form(&self, eta: &[ShellJet], xi: &[ShellJet], grid: &SurfaceGrid) -> Result<f64> {
        guard(eta, self.radius)?;
        let (a, b) = (self.membrane(), self.bending());
        Ok(self.integrate(grid, &|i| {
            let g = metric_tensor(&eta[i], self.radius, self.convention);
            let r = curvature_tensor(&eta[i], self.radius);
            let dg = metric_direction(&eta[i], &xi[i], self.radius);
            let dr = curvature_direction(&eta[i], &xi[i], self.radius);
            a * self.tensor.pair(&g, &dg) + b * self.tensor.pair(&r, &dr)
        }))
    }

    /// `K_δ(η)`.
    pub fn linearized_energy(&self, delta: &[ShellJet], eta: &[ShellJet], grid: &SurfaceGrid) -> Result<f64> {
        guard(delta, self.radius)?;
        let (a, b) = (self.membrane(), self.bending());
        Ok(self.integrate(grid, &|i| {
            let g = linearized_metric(&delta[i], &eta[i], self.radius, self.convention);
            let r = linearized_curvature(&delta[i], &eta[i], self.radius);
            a * self.tensor.pair(&g, &g) + b * self.tensor.pair(&r, &r)
        }))
    }

    /// `K_δ(η, ξ)`.
    pub fn linearized_form(
        &self,
        delta: &[ShellJet],
        eta: &[ShellJet],
        xi: &[ShellJet],
        grid: &SurfaceGrid,
    ) -> Result<f64> {
        guard(delta, self.radius)?;
        let (a, b) = (self.membrane(), self.bending());
        Ok(self.integrate(grid, &|i| {
            let g = linearized_metric(&delta[i], &eta[i], self.radius, self.convention);
            let r = linearized_curvature(&delta[i], &eta[i], self.radius);
            let dg = linearized_metric_direction(&delta[i], &xi[i], self.radius);
            let dr = linearized_curvature_direction(&delta[i], &xi[i], self.radius);
            a * self.tensor.pair(&g, &dg) + b * self.tensor.pair(&r, &dr)
        }))
    }

    /// Stiffness `S_kj = K_δ(X_j, X_k) - K_δ(0, X_k)` and load
    /// `g_k = K_δ(0, X_k)` over a family of shell tables.
    pub fn linearized_system(
        &self,
        delta: &[ShellJet],
        family: &[&[ShellJet]],
        grid: &SurfaceGrid,
    ) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DVector<f64>)> {
        self.linearized_cross(delta, family, family, grid)
    }

    /// Rectangular variant: rows over `tests`, columns over `cols`.
    pub fn linearized_cross(
        &self,
        delta: &[ShellJet],
        tests: &[&[ShellJet]],
        cols: &[&[ShellJet]],
        grid: &SurfaceGrid,
    ) -> Result<(nalgebra::DMatrix<f64>, nalgebra::DVector<f64>)> {
        guard(delta, self.radius)?;
        let (a, b) = (self.membrane(), self.bending());
        let zero = ShellJet::default();
        let dirs = |fam: &[&[ShellJet]]| -> Vec<Vec<(Sym2, Sym2)>> {
            fam.iter()
                .map(|f| {
                    (0..grid.len())
                        .map(|i| {
                            let g = linearized_metric_direction(&delta[i], &f[i], self.radius);
                            let r = linearized_curvature_direction(&delta[i], &f[i], self.radius);
                            (g, r)
                        })
                        .collect()
                })
                .collect()
        };
        let td = dirs(tests);
        let cd: Vec<Vec<(Sym2, Sym2)>> = dirs(cols)
            .into_iter()
            .map(|v| v.into_iter().map(|(g, r)| (self.tensor.apply(&g), self.tensor.apply(&r))).collect())
            .collect();
        let base: Vec<(Sym2, Sym2)> = (0..grid.len())
            .map(|i| {
                let g0 = linearized_metric(&delta[i], &zero, self.radius, self.convention);
                let r0 = linearized_curvature(&delta[i], &zero, self.radius);
                (self.tensor.apply(&g0), self.tensor.apply(&r0))
            })
            .collect();
        let mut stiff = nalgebra::DMatrix::zeros(tests.len(), cols.len());
        let mut load = nalgebra::DVector::zeros(tests.len());
        for k in 0..tests.len() {
            load[k] = self.integrate(grid, &|i| {
                a * contract(&base[i].0, &td[k][i].0) + b * contract(&base[i].1, &td[k][i].1)
            });
            for j in 0..cols.len() {
                stiff[(k, j)] = self.integrate(grid, &|i| {
                    a * contract(&cd[j][i].0, &td[k][i].0) + b * contract(&cd[j][i].1, &td[k][i].1)
                });
            }
        }
        Ok((stiff, load))
    }
}

/// `½∫|∇²η|²` with the flat Hessian on `ω`.
pub fn bending_energy(eta: &[ShellJet], grid: &SurfaceGrid) -> f64 {
    0.5 * pairwise_sum_by(0, grid.len(), &|i| grid.weight(i) * eta[i].hessian_sq())
}

/// `∫∇²η : ∇²ξ`.
pub fn bending_form(eta: &[ShellJet], xi: &[ShellJet], grid: &SurfaceGrid) -> f64 {
    pairwise_sum_by(0, grid.len(), &|i| grid.weight(i) * eta[i].hessian_dot(&xi[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{ShellBasis, ShellField};

    fn koiter(conv: MetricConvention) -> Koiter {
        Koiter {
            tensor: ElasticityTensor::Isotropic { lambda: 1.0, mu: 1.0 },
            thickness: 1.0,
            radius: 1.0,
            convention: conv,
        }
    }

    fn sample(basis: &ShellBasis, c: &[f64]) -> ShellField {
        basis.combine(c)
    }

    #[test]
    fn tensors_at_rest() {
        let z = ShellJet::default();
        assert_eq!(metric_tensor(&z, 1.0, MetricConvention::AsPrinted), [0.0, 1.0, 0.0]);
        assert_eq!(metric_tensor(&z, 1.0, MetricConvention::VanishingAtZero), [0.0; 3]);
        assert_eq!(curvature_tensor(&z, 1.0), [0.0; 3]);
        assert_eq!(curvature_tensor(&z, 2.5), [0.0; 3]);
    }

    #[test]
    fn coercivity_constant() {
        let t = ElasticityTensor::Isotropic { lambda: 1.0, mu: 1.0 };
        assert!((t.coercivity() - 2.0).abs() < 1e-12);
        assert_eq!(ElasticityTensor::ScaledIdentity(3.0).coercivity(), 3.0);
    }

    #[test]
    fn directional_derivative_is_twice_the_form() {
        let basis = ShellBasis::build(2.0, 3, 3);
        let grid = SurfaceGrid::gauss(2.0, 24, 12);
        let eta = sample(&basis, &[0.05, -0.03, 0.02, 0.04, 0.0, 0.01]);
        let xi = sample(&basis, &[0.3, 0.2, -0.5, 0.1, 0.7, -0.2]);
        for conv in [MetricConvention::AsPrinted, MetricConvention::VanishingAtZero] {
            let k = koiter(conv);
            let s = 1e-4;
            let kp = k.energy(&eta.add(&xi.scale(s)).eval_grid(&grid), &grid).unwrap();
            let km = k.energy(&eta.add(&xi.scale(-s)).eval_grid(&grid), &grid).unwrap();
            let fd = (kp - km) / (2.0 * s);
            let form = k.form(&eta.eval_grid(&grid), &xi.eval_grid(&grid), &grid).unwrap();
            assert!((fd - 2.0 * form).abs() <= 1e-6 * fd.abs().max(1e-12), "{fd} vs {form}");
        }
    }

    #[test]
    fn linearized_matches_nonlinear_on_diagonal() {
        let basis = ShellBasis::build(2.0, 3, 3);
        let grid = SurfaceGrid::gauss(2.0, 24, 12);
        let eta = sample(&basis, &[0.05, -0.03, 0.02, 0.04, 0.0, 0.01]).eval_grid(&grid);
        let k = koiter(MetricConvention::AsPrinted);
        for e in &eta {
            let a = linearized_metric(e, e, 1.0, k.convention);
            let b = metric_tensor(e, 1.0, k.convention);
            let c = linearized_curvature(e, e, 1.0);
            let d = curvature_tensor(e, 1.0);
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() < 1e-14 && (c[i] - d[i]).abs() < 1e-14);
            }
        }
        let kd = k.linearized_energy(&eta, &eta, &grid).unwrap();
        let kn = k.energy(&eta, &grid).unwrap();
        assert!((kd - kn).abs() <= 1e-12 * kn.abs());
    }

    #[test]
    fn linearized_form_is_half_derivative() {
        let basis = ShellBasis::build(2.0, 3, 3);
        let grid = SurfaceGrid::gauss(2.0, 24, 12);
        let delta = sample(&basis, &[0.02, 0.05, -0.04]).eval_grid(&grid);
        let eta = sample(&basis, &[0.05, -0.03, 0.02, 0.04]);
        let xi = sample(&basis, &[0.0, 0.3, 0.2, -0.5, 0.1]);
        let k = koiter(MetricConvention::AsPrinted);
        let s = 1e-3;
        let kp = k.linearized_energy(&delta, &eta.add(&xi.scale(s)).eval_grid(&grid), &grid).unwrap();
        let km = k.linearized_energy(&delta, &eta.add(&xi.scale(-s)).eval_grid(&grid), &grid).unwrap();
        let form = k
            .linearized_form(&delta, &eta.eval_grid(&grid), &xi.eval_grid(&grid), &grid)
            .unwrap();
        assert!(((kp - km) / (4.0 * s) - form).abs() < 1e-9 * form.abs().max(1.0));
    }

    #[test]
    fn bending_of_axisymmetric_mode() {
        let basis = ShellBasis::build(2.0, 2, 3);
        let grid = SurfaceGrid::gauss(2.0, 8, 12);
        let idx = (0..basis.len()).find(|&i| basis.modes[i].k == 0).unwrap();
        let f = basis.field(idx);
        let jets = f.eval_grid(&grid);
        let prof = &basis.modes[idx].profile;
        // L = 2 makes s = z - 1, so the z-scaling is the identity
        let dd = prof.deriv().deriv();
        let oracle = 2.0 * std::f64::consts::PI * dd.mul(&dd).integral();
        let e = bending_energy(&jets, &grid);
        assert!((2.0 * e - oracle).abs() < 1e-10 * oracle);
        assert!((bending_form(&jets, &jets, &grid) - 2.0 * e).abs() < 1e-12 * e);
    }
}
