//! Scalar fields on `ω` that are trigonometric polynomials in `θ` with
//! polynomial coefficients in `z`. The class is closed under products,
//! derivatives, θ-means and antiderivatives, so every shell-side quantity
//! of the extension operators is evaluated exactly.

use super::quadrature::SurfaceGrid;
use crate::numerics::Poly;

/// Value and derivatives up to order two of a scalar field at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShellJet {
    pub value: f64,
    pub d_theta: f64,
    pub d_z: f64,
    pub d_tt: f64,
    pub d_tz: f64,
    pub d_zz: f64,
}

impl ShellJet {
    pub fn constant(value: f64) -> Self {
        ShellJet {
            value,
            ..Default::default()
        }
    }

    pub fn scaled(&self, f: f64) -> Self {
        ShellJet {
            value: self.value * f,
            d_theta: self.d_theta * f,
            d_z: self.d_z * f,
            d_tt: self.d_tt * f,
            d_tz: self.d_tz * f,
            d_zz: self.d_zz * f,
        }
    }

    pub fn add(&self, o: &ShellJet) -> Self {
        ShellJet {
            value: self.value + o.value,
            d_theta: self.d_theta + o.d_theta,
            d_z: self.d_z + o.d_z,
            d_tt: self.d_tt + o.d_tt,
            d_tz: self.d_tz + o.d_tz,
            d_zz: self.d_zz + o.d_zz,
        }
    }

    pub fn add_scaled(&mut self, o: &ShellJet, f: f64) {
        self.value += f * o.value;
        self.d_theta += f * o.d_theta;
        self.d_z += f * o.d_z;
        self.d_tt += f * o.d_tt;
        self.d_tz += f * o.d_tz;
        self.d_zz += f * o.d_zz;
    }

    /// `|∇²|²` with the flat parameter Hessian.
    pub fn hessian_sq(&self) -> f64 {
        self.d_tt * self.d_tt + 2.0 * self.d_tz * self.d_tz + self.d_zz * self.d_zz
    }

    /// `∇²a : ∇²b`.
    pub fn hessian_dot(&self, o: &ShellJet) -> f64 {
        self.d_tt * o.d_tt + 2.0 * self.d_tz * o.d_tz + self.d_zz * o.d_zz
    }
}

/// Which trigonometric factor multiplies a z-profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Parity {
    Cos,
    Sin,
}

/// `f(θ, z) = Σ_k cos(kθ) c_k(s) + sin(kθ) s_k(s)`, `s = 2z/L - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShellField {
    pub length: f64,
    pub cos: Vec<Poly>,
    pub sin: Vec<Poly>,
}

impl ShellField {
    pub fn zero(length: f64) -> Self {
        ShellField {
            length,
            cos: vec![Poly::zero()],
            sin: vec![Poly::zero()],
        }
    }

    pub fn constant(length: f64, c: f64) -> Self {
        let mut f = Self::zero(length);
        f.cos[0] = Poly::constant(c);
        f
    }

    /// Single mode `cos(kθ) p(s)` or `sin(kθ) p(s)`.
    pub fn mode(length: f64, k: usize, parity: Parity, profile: Poly) -> Self {
        let mut f = Self::zero(length);
        f.ensure(k);
        match parity {
            Parity::Cos => f.cos[k] = profile,
            Parity::Sin => {
                if k > 0 {
                    f.sin[k] = profile
                }
            }
        }
        f
    }

    /// Builds a field from a z-profile given as a polynomial in `z` itself.
    pub fn profile_in_z(length: f64, poly_in_z: &Poly) -> Poly {
        // z = L (s + 1) / 2
        let half = length / 2.0;
        let z_of_s = Poly::from_coeffs(vec![half, half]);
        let mut acc = Poly::zero();
        let mut pow = Poly::constant(1.0);
        for c in &poly_in_z.coeffs {
            acc.add_scaled(&pow, *c);
            pow = pow.mul(&z_of_s);
        }
        acc
    }

    fn ensure(&mut self, k: usize) {
        while self.cos.len() <= k {
            self.cos.push(Poly::zero());
            self.sin.push(Poly::zero());
        }
    }

    pub fn max_frequency(&self) -> usize {
        let mut k = 0;
        for j in 0..self.cos.len() {
            if !self.cos[j].is_zero() || !self.sin[j].is_zero() {
                k = j;
            }
        }
        k
    }

    #[inline]
    fn s_of(&self, z: f64) -> f64 {
        2.0 * z / self.length - 1.0
    }

    pub fn eval(&self, theta: f64, z: f64) -> f64 {
        self.eval_jet(theta, z).value
    }

    pub fn eval_jet(&self, theta: f64, z: f64) -> ShellJet {
        let s = self.s_of(z);
        let dz = 2.0 / self.length;
        let mut out = ShellJet::default();
        for k in 0..self.cos.len() {
            let kf = k as f64;
            let (sn, cs) = (kf * theta).sin_cos();
            let c = self.cos[k].eval_jet(s);
            let sj = if k > 0 {
                self.sin[k].eval_jet(s)
            } else {
                [0.0; 3]
            };
            accumulate(&mut out, kf, cs, sn, &c, &sj, dz);
        }
        out
    }

    /// Evaluates value and derivatives at every node of `grid`.
    pub fn eval_grid(&self, grid: &SurfaceGrid) -> Vec<ShellJet> {
        let nz = grid.z.len();
        let nk = self.cos.len();
        let dz = 2.0 / self.length;
        let mut zc = vec![[0.0; 3]; nk * nz];
        let mut zs = vec![[0.0; 3]; nk * nz];
        for k in 0..nk {
            for (iz, z) in grid.z.nodes.iter().enumerate() {
                let s = self.s_of(*z);
                zc[k * nz + iz] = self.cos[k].eval_jet(s);
                if k > 0 {
                    zs[k * nz + iz] = self.sin[k].eval_jet(s);
                }
            }
        }
        let mut out = vec![ShellJet::default(); grid.len()];
        for (it, theta) in grid.theta.nodes.iter().enumerate() {
            for k in 0..nk {
                let kf = k as f64;
                let (sn, cs) = (kf * theta).sin_cos();
                for iz in 0..nz {
                    accumulate(
                        &mut out[it * nz + iz],
                        kf,
                        cs,
                        sn,
                        &zc[k * nz + iz],
                        &zs[k * nz + iz],
                        dz,
                    );
                }
            }
        }
        out
    }

    pub fn scale(&self, f: f64) -> Self {
        ShellField {
            length: self.length,
            cos: self.cos.iter().map(|p| p.scale(f)).collect(),
            sin: self.sin.iter().map(|p| p.scale(f)).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &ShellField, f: f64) {
        self.ensure(other.cos.len() - 1);
        for k in 0..other.cos.len() {
            self.cos[k].add_scaled(&other.cos[k], f);
            self.sin[k].add_scaled(&other.sin[k], f);
        }
    }

    pub fn add(&self, other: &ShellField) -> Self {
        let mut out = self.clone();
        out.add_scaled(other, 1.0);
        out
    }

    /// Exact product of two fields.
    pub fn mul(&self, other: &ShellField) -> Self {
        let mut out = Self::zero(self.length);
        out.ensure(self.cos.len() + other.cos.len());
        for a in 0..self.cos.len() {
            for b in 0..other.cos.len() {
                let (ac, as_) = (&self.cos[a], &self.sin[a]);
                let (bc, bs) = (&other.cos[b], &other.sin[b]);
                let sum = a + b;
                let diff = a.abs_diff(b);
                // sign of sin((a-b)θ) relative to sin(|a-b|θ)
                let sgn = if a >= b { 1.0 } else { -1.0 };
                if !ac.is_zero() && !bc.is_zero() {
                    let p = ac.mul(bc).scale(0.5);
                    out.cos[diff].add_scaled(&p, 1.0);
                    out.cos[sum].add_scaled(&p, 1.0);
                }
                if !as_.is_zero() && !bs.is_zero() {
                    let p = as_.mul(bs).scale(0.5);
                    out.cos[diff].add_scaled(&p, 1.0);
                    out.cos[sum].add_scaled(&p, -1.0);
                }
                if !as_.is_zero() && !bc.is_zero() {
                    // sin aθ cos bθ = ½[sin(a+b)θ + sin(a-b)θ]
                    let p = as_.mul(bc).scale(0.5);
                    out.sin[sum].add_scaled(&p, 1.0);
                    out.sin[diff].add_scaled(&p, sgn);
                }
                if !ac.is_zero() && !bs.is_zero() {
                    // cos aθ sin bθ = ½[sin(a+b)θ - sin(a-b)θ]
                    let p = ac.mul(bs).scale(0.5);
                    out.sin[sum].add_scaled(&p, 1.0);
                    out.sin[diff].add_scaled(&p, -sgn);
                }
            }
        }
        out.sin[0] = Poly::zero();
        out.trim();
        out
    }

    fn trim(&mut self) {
        while self.cos.len() > 1 {
            let k = self.cos.len() - 1;
            if self.cos[k].is_zero() && self.sin[k].is_zero() {
                self.cos.pop();
                self.sin.pop();
            } else {
                break;
            }
        }
    }

    /// θ-mean as a z-profile (polynomial in `s`).
    pub fn theta_mean(&self) -> Poly {
        self.cos[0].clone()
    }

    /// `f - f̄`, the θ-mean removed.
    pub fn mean_free(&self) -> Self {
        let mut out = self.clone();
        out.cos[0] = Poly::zero();
        out
    }

    /// `∫₀^θ (f - f̄) dθ'`, which is 2π-periodic.
    pub fn theta_antiderivative_mean_free(&self) -> Self {
        let mut out = Self::zero(self.length);
        out.ensure(self.cos.len() - 1);
        for k in 1..self.cos.len() {
            let kf = k as f64;
            // ∫₀^θ cos ks = sin kθ / k ; ∫₀^θ sin ks = (1 - cos kθ) / k
            out.sin[k].add_scaled(&self.cos[k], 1.0 / kf);
            out.cos[k].add_scaled(&self.sin[k], -1.0 / kf);
            out.cos[0].add_scaled(&self.sin[k], 1.0 / kf);
        }
        out.trim();
        out
    }

    /// `∂θ f`.
    pub fn d_theta(&self) -> Self {
        let mut out = Self::zero(self.length);
        out.ensure(self.cos.len() - 1);
        for k in 1..self.cos.len() {
            let kf = k as f64;
            out.sin[k] = self.cos[k].scale(-kf);
            out.cos[k] = self.sin[k].scale(kf);
        }
        out.trim();
        out
    }

    /// `∂z f`.
    pub fn d_z(&self) -> Self {
        let f = 2.0 / self.length;
        ShellField {
            length: self.length,
            cos: self.cos.iter().map(|p| p.deriv().scale(f)).collect(),
            sin: self.sin.iter().map(|p| p.deriv().scale(f)).collect(),
        }
    }

    /// `∫₀^z p(z') dz'` for a z-profile `p` given in the variable `s`.
    pub fn z_antiderivative(length: f64, profile: &Poly) -> Poly {
        profile.antideriv_from(-1.0).scale(length / 2.0)
    }

    /// Evaluates a z-profile (in `s`) at physical `z`, with `d/dz` and
    /// `d²/dz²`.
    pub fn eval_profile(length: f64, profile: &Poly, z: f64) -> [f64; 3] {
        let s = 2.0 * z / length - 1.0;
        let j = profile.eval_jet(s);
        let f = 2.0 / length;
        [j[0], j[1] * f, j[2] * f * f]
    }

    /// Exact integral over `ω`.
    pub fn integral(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.cos[0].integral() * self.length / 2.0
    }
}

#[inline]
fn accumulate(
    out: &mut ShellJet,
    k: f64,
    cs: f64,
    sn: f64,
    c: &[f64; 3],
    s: &[f64; 3],
    dz: f64,
) {
    out.value += cs * c[0] + sn * s[0];
    out.d_theta += k * (-sn * c[0] + cs * s[0]);
    out.d_z += dz * (cs * c[1] + sn * s[1]);
    out.d_tt += -k * k * (cs * c[0] + sn * s[0]);
    out.d_tz += k * dz * (-sn * c[1] + cs * s[1]);
    out.d_zz += dz * dz * (cs * c[2] + sn * s[2]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample(length: f64) -> ShellField {
        let mut f = ShellField::mode(length, 0, Parity::Cos, Poly::from_coeffs(vec![0.2, 0.1]));
        f.add_scaled(
            &ShellField::mode(length, 2, Parity::Sin, Poly::from_coeffs(vec![0.0, 1.0, -0.5])),
            1.0,
        );
        f.add_scaled(
            &ShellField::mode(length, 1, Parity::Cos, Poly::from_coeffs(vec![0.3, 0.0, 0.4])),
            1.0,
        );
        f
    }

    #[test]
    fn product_matches_pointwise_product() {
        let f = sample(2.0);
        let g = sample(2.0).d_theta().add(&ShellField::constant(2.0, 0.7));
        let h = f.mul(&g);
        for &(t, z) in &[(0.3, 0.2), (2.0, 1.1), (5.5, 1.9)] {
            let want = f.eval(t, z) * g.eval(t, z);
            assert!((h.eval(t, z) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn antiderivative_is_periodic_and_differentiates_back() {
        let f = sample(2.0);
        let a = f.theta_antiderivative_mean_free();
        for &z in &[0.1, 0.9, 1.7] {
            assert!(a.eval(0.0, z).abs() < 1e-14);
            assert!(a.eval(2.0 * PI, z).abs() < 1e-13);
            let mean = ShellField::eval_profile(2.0, &f.theta_mean(), z)[0];
            for &t in &[0.4, 3.0] {
                let d = a.eval_jet(t, z).d_theta;
                assert!((d - (f.eval(t, z) - mean)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn grid_evaluation_agrees_with_pointwise() {
        let f = sample(3.0);
        let grid = SurfaceGrid::gauss(3.0, 7, 5);
        let tab = f.eval_grid(&grid);
        for (i, jet) in tab.iter().enumerate() {
            let (t, z) = grid.point(i);
            let p = f.eval_jet(t, z);
            assert!((jet.value - p.value).abs() < 1e-14);
            assert!((jet.d_tz - p.d_tz).abs() < 1e-13);
            assert!((jet.d_zz - p.d_zz).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_fields_match_jets() {
        let f = sample(2.0);
        let (t, z) = (1.3, 0.6);
        let j = f.eval_jet(t, z);
        assert!((f.d_theta().eval(t, z) - j.d_theta).abs() < 1e-13);
        assert!((f.d_z().eval(t, z) - j.d_z).abs() < 1e-13);
        assert!((f.d_theta().d_z().eval(t, z) - j.d_tz).abs() < 1e-13);
    }

    #[test]
    fn integral_of_constant_is_area() {
        let f = ShellField::constant(2.0, 1.5);
        assert!((f.integral() - 1.5 * 4.0 * PI).abs() < 1e-13);
    }
}
