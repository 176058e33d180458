//! Piola transform between the reference cylinder and the deformed domain.
//!
//! Fields are stored in orthonormal cylindrical frame components at
//! reference nodes. With `s = r + η̃` and `e = 1 + ∂_r η̃`, the frame Jacobian
//! of `ψ_η` is `F = [[e, ∂_θη̃/r, ∂_zη̃], [0, s/r, 0], [0, 0, 1]]` with
//! `det F = e s / r`, and the forward transform acts as `A = F / det F`.
//! Equivalently `A = (r / detG) · G · diag(1, 1/r, 1)` for the coordinate
//! gradient `G` of the map.

use crate::geometry::{DomainMap, MapNode};
use crate::numerics::norm3;
use crate::spaces::{Grad3, VectorTable};

pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn matvec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Forward factor `A` at a node.
#[inline]
pub fn piola_matrix(node: &MapNode) -> Mat3 {
    let s = node.radius();
    let e = node.stretch();
    let inv = 1.0 / (e * s);
    [
        [node.r / s, node.ext.d_theta * inv, node.r * node.ext.d_z * inv],
        [0.0, 1.0 / e, 0.0],
        [0.0, 0.0, node.r * inv],
    ]
}

/// Inverse factor `A⁻¹`.
#[inline]
pub fn piola_matrix_inverse(node: &MapNode) -> Mat3 {
    let s = node.radius();
    let e = node.stretch();
    let r = node.r;
    [
        [s / r, -node.ext.d_theta / r, -s * node.ext.d_z / r],
        [0.0, e, 0.0],
        [0.0, 0.0, e * s / r],
    ]
}

/// Derivative of `A` given the derivatives of `(r, s, e, ∂_θη̃, ∂_zη̃)`.
#[inline]
fn piola_matrix_derivative(node: &MapNode, dr: f64, ds: f64, de: f64, dtt: f64, dtz: f64) -> Mat3 {
    let s = node.radius();
    let e = node.stretch();
    let r = node.r;
    let tt = node.ext.d_theta;
    let tz = node.ext.d_z;
    let inv = 1.0 / (e * s);
    let dinv = -(de * s + e * ds) * inv * inv;
    [
        [
            dr / s - r * ds / (s * s),
            dtt * inv + tt * dinv,
            (dr * tz + r * dtz) * inv + r * tz * dinv,
        ],
        [0.0, -de / (e * e), 0.0],
        [0.0, 0.0, dr * inv + r * dinv],
    ]
}

/// `[∂_r A, ∂_θ A, ∂_z A]` in reference coordinates.
pub fn piola_matrix_partials(node: &MapNode) -> [Mat3; 3] {
    let x = &node.ext;
    [
        piola_matrix_derivative(node, 1.0, node.stretch(), x.d_rr, x.d_rt, x.d_rz),
        piola_matrix_derivative(node, 0.0, x.d_theta, x.d_rt, x.d_tt, x.d_tz),
        piola_matrix_derivative(node, 0.0, x.d_z, x.d_rz, x.d_tz, x.d_zz),
    ]
}

/// `∂_t A` at a fixed reference point.
pub fn piola_matrix_rate(node: &MapNode) -> Mat3 {
    let q = &node.rate;
    piola_matrix_derivative(node, 0.0, q.value, q.d_r, q.d_theta, q.d_z)
}

/// Coordinate partials `P[i][c] = ∂_c φ_i`, `c ∈ (r, θ, z)`, of frame
/// components from the frame gradient at reference radius `r`.
#[inline]
pub fn coordinate_partials(r: f64, value: &[f64; 3], grad: &Grad3) -> Mat3 {
    [
        [grad[0][0], r * grad[0][1] + value[1], grad[0][2]],
        [grad[1][0], r * grad[1][1] - value[0], grad[1][2]],
        [grad[2][0], r * grad[2][1], grad[2][2]],
    ]
}

/// Physical frame gradient of a deformed-domain field whose frame
/// components `w` have reference-coordinate partials `partials`.
#[inline]
pub fn physical_gradient(node: &MapNode, w: &[f64; 3], partials: &Mat3) -> Grad3 {
    let s = node.radius();
    let e = node.stretch();
    let ct = node.ext.d_theta / e;
    let cz = node.ext.d_z / e;
    let turn = [-w[1], w[0], 0.0];
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        let p = partials[i];
        g[i][0] = p[0] / e;
        g[i][1] = (p[1] - ct * p[0] + turn[i]) / s;
        g[i][2] = p[2] - cz * p[0];
    }
    g
}

/// Value and physical gradient of `Aφ` at one node.
#[inline]
pub fn forward_jet(node: &MapNode, value: &[f64; 3], grad: &Grad3) -> ([f64; 3], Grad3) {
    forward_from_partials(node, value, &coordinate_partials(node.r, value, grad))
}

/// As [`forward_jet`], from reference-coordinate partials of `φ`.
#[inline]
pub fn forward_from_partials(node: &MapNode, value: &[f64; 3], p: &Mat3) -> ([f64; 3], Grad3) {
    let a = piola_matrix(node);
    let da = piola_matrix_partials(node);
    let w = matvec(&a, value);
    let mut pw = [[0.0; 3]; 3];
    for c in 0..3 {
        let dphi = [p[0][c], p[1][c], p[2][c]];
        let t1 = matvec(&da[c], value);
        let t2 = matvec(&a, &dphi);
        for i in 0..3 {
            pw[i][c] = t1[i] + t2[i];
        }
    }
    (w, physical_gradient(node, &w, &pw))
}

/// Time derivative at a fixed physical point of `Aφ`, where `phi_rate` is
/// the derivative of `φ` at fixed reference point and `grad` is the
/// physical gradient of `Aφ`.
#[inline]
pub fn eulerian_rate(node: &MapNode, value: &[f64; 3], phi_rate: &[f64; 3], grad: &Grad3) -> [f64; 3] {
    let at = piola_matrix_rate(node);
    let a = piola_matrix(node);
    let t1 = matvec(&at, value);
    let t2 = matvec(&a, phi_rate);
    let speed = node.rate.value;
    [
        t1[0] + t2[0] - grad[0][0] * speed,
        t1[1] + t2[1] - grad[1][0] * speed,
        t1[2] + t2[2] - grad[2][0] * speed,
    ]
}

/// Maxima of the pointwise estimate ratios of the forward transform.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PiolaBoundReport {
    pub value_ratio: f64,
    pub gradient_ratio: f64,
}

/// Forward or inverse application over a domain map.
#[derive(Clone, Copy, Debug)]
pub struct PiolaContext<'a> {
    pub map: &'a DomainMap,
}

impl<'a> PiolaContext<'a> {
    pub fn new(map: &'a DomainMap) -> Self {
        PiolaContext { map }
    }

    /// `Aφ` at every node, with physical gradients when `phi` carries
    /// reference gradients.
    pub fn forward(&self, phi: &VectorTable) -> VectorTable {
        assert_eq!(phi.len(), self.map.nodes.len());
        let mut out = VectorTable::zeros(phi.len(), phi.has_grads());
        for (i, node) in self.map.nodes.iter().enumerate() {
            if phi.has_grads() {
                let (w, g) = forward_jet(node, &phi.values[i], &phi.grads[i]);
                out.values[i] = w;
                out.grads[i] = g;
            } else {
                out.values[i] = matvec(&piola_matrix(node), &phi.values[i]);
            }
        }
        out
    }

    /// `A⁻¹φ` at every node (values only).
    pub fn inverse(&self, phi: &VectorTable) -> VectorTable {
        assert_eq!(phi.len(), self.map.nodes.len());
        VectorTable {
            values: self
                .map
                .nodes
                .iter()
                .zip(&phi.values)
                .map(|(n, v)| matvec(&piola_matrix_inverse(n), v))
                .collect(),
            grads: Vec::new(),
        }
    }

    /// Nodewise ratios `|Aφ| / ((1+|η̃|+|∇η̃|)|φ|)` and the gradient
    /// analogue; nodes with a zero denominator are skipped.
    pub fn bound_check(&self, phi: &VectorTable) -> PiolaBoundReport {
        let image = self.forward(phi);
        let mut rep = PiolaBoundReport::default();
        for (i, node) in self.map.nodes.iter().enumerate() {
            let x = &node.ext;
            let first = 1.0 + x.value.abs() + (x.d_r * x.d_r + x.d_theta * x.d_theta / (node.r * node.r) + x.d_z * x.d_z).sqrt();
            let second = [x.d_rr, x.d_rt, x.d_rz, x.d_rt, x.d_tt, x.d_tz, x.d_rz, x.d_tz, x.d_zz]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            let pv = norm3(&phi.values[i]);
            let den = first * pv;
            if den > 0.0 {
                rep.value_ratio = rep.value_ratio.max(norm3(&image.values[i]) / den);
            }
            if phi.has_grads() {
                let pg = frob(&phi.grads[i]);
                let den = first.powi(3) * pv + second * pv + first * pg;
                if den > 0.0 {
                    rep.gradient_ratio = rep.gradient_ratio.max(frob(&image.grads[i]) / den);
                }
            }
        }
        assert!(rep.value_ratio.is_finite() && rep.gradient_ratio.is_finite());
        rep
    }
}

#[inline]
pub fn frob(g: &Grad3) -> f64 {
    g.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// `[∇ψ_η]φ·n(η) − (R+η)φ_r` at a wall node, with the coordinate gradient
/// of the map at `r = R` acting on the component vector `φ`.
pub fn normal_trace_defect(radius: f64, eta: f64, d_theta: f64, d_z: f64, phi: &[f64; 3]) -> f64 {
    let s = radius + eta;
    let g_phi = [phi[0] + d_theta * phi[1] + d_z * phi[2], s * phi[1], phi[2]];
    let n = [s, -d_theta, -d_z * s];
    g_phi[0] * n[0] + g_phi[1] * n[1] + g_phi[2] * n[2] - s * phi[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{to_cartesian, frame_to_cartesian, ReferenceGeometry};
    use crate::numerics::Poly;
    use crate::spaces::{Parity, ShellField, ShellJet};

    fn bubble(length: f64) -> Poly {
        ShellField::profile_in_z(
            length,
            &Poly::from_coeffs(vec![0.0, 0.0, 1.0, -2.0 / length, 1.0 / (length * length)]),
        )
    }

    fn sample_eta(length: f64) -> ShellField {
        let b = bubble(length);
        let mut f = ShellField::mode(length, 1, Parity::Sin, b.scale(0.3));
        f.add_scaled(&ShellField::mode(length, 2, Parity::Cos, b.scale(0.15)), 1.0);
        f.add_scaled(&ShellField::mode(length, 0, Parity::Cos, b.scale(0.1)), 1.0);
        f
    }

    /// Smooth reference field in frame components.
    fn phi(r: f64, t: f64, z: f64) -> [f64; 3] {
        [
            r * z * (1.0 + t.cos()) + 0.3 * r * r,
            z * z * t.sin() - 0.2 * r,
            0.5 + r * r * (2.0 * t).cos() * z,
        ]
    }

    /// Coordinate partials of `phi` by central differences.
    fn phi_partials(r: f64, t: f64, z: f64) -> Mat3 {
        let h = 1e-5;
        let mut p = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut a = [r, t, z];
            let mut b = [r, t, z];
            a[c] += h;
            b[c] -= h;
            let fa = phi(a[0], a[1], a[2]);
            let fb = phi(b[0], b[1], b[2]);
            for i in 0..3 {
                p[i][c] = (fa[i] - fb[i]) / (2.0 * h);
            }
        }
        p
    }

    fn frame_grad(r: f64, v: &[f64; 3], p: &Mat3) -> Grad3 {
        [
            [p[0][0], (p[0][1] - v[1]) / r, p[0][2]],
            [p[1][0], (p[1][1] + v[0]) / r, p[1][2]],
            [p[2][0], p[2][1] / r, p[2][2]],
        ]
    }

    #[test]
    fn partials_round_trip() {
        let (r, t, z) = (0.7, 1.1, 0.4);
        let v = phi(r, t, z);
        let p = phi_partials(r, t, z);
        let g = frame_grad(r, &v, &p);
        let back = coordinate_partials(r, &v, &g);
        for i in 0..3 {
            for c in 0..3 {
                assert!((back[i][c] - p[i][c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_at_rest() {
        let node = MapNode::at(&ReferenceGeometry::default(), 0.6, 0.3, 1.0, &ShellJet::default(), None);
        let a = piola_matrix(&node);
        let ai = piola_matrix_inverse(&node);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((a[i][j] - id).abs() < 1e-15);
                assert!((ai[i][j] - id).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn physical_gradient_matches_cartesian_differences() {
        let geom = ReferenceGeometry::default();
        let eta = sample_eta(geom.length);
        let map_at = |x: [f64; 3]| {
            let j = eta.eval_jet(x[1], x[2]);
            MapNode::at(&geom, x[0], x[1], x[2], &j, None)
        };
        let cart_field = |x: [f64; 3]| {
            let node = map_at(x);
            let w = matvec(&piola_matrix(&node), &phi(x[0], x[1], x[2]));
            frame_to_cartesian(x[1], w)
        };
        let cart_pos = |x: [f64; 3]| to_cartesian(map_at(x).mapped());
        for &(r, t, z) in &[(0.55, 0.4, 0.7), (0.8, 2.5, 1.3), (0.95, 5.0, 0.2)] {
            let x0 = [r, t, z];
            let node = map_at(x0);
            let v = phi(r, t, z);
            let g = frame_grad(r, &v, &phi_partials(r, t, z));
            let (_, grad) = forward_jet(&node, &v, &g);
            // Cartesian oracle: dV/dX (dx/dX)^{-1}
            let h = 1e-5;
            let mut dv = nalgebra::Matrix3::zeros();
            let mut dx = nalgebra::Matrix3::zeros();
            for c in 0..3 {
                let mut a = x0;
                let mut b = x0;
                a[c] += h;
                b[c] -= h;
                let (fa, fb) = (cart_field(a), cart_field(b));
                let (pa, pb) = (cart_pos(a), cart_pos(b));
                for i in 0..3 {
                    dv[(i, c)] = (fa[i] - fb[i]) / (2.0 * h);
                    dx[(i, c)] = (pa[i] - pb[i]) / (2.0 * h);
                }
            }
            let oracle = dv * dx.try_inverse().unwrap();
            let (sn, cs) = t.sin_cos();
            let rot = nalgebra::Matrix3::new(cs, -sn, 0.0, sn, cs, 0.0, 0.0, 0.0, 1.0);
            let mine = rot * nalgebra::Matrix3::from_fn(|i, j| grad[i][j]) * rot.transpose();
            assert!((mine - oracle).norm() < 1e-6 * (1.0 + oracle.norm()), "{mine} vs {oracle}");
        }
    }

    #[test]
    fn divergence_is_scaled_reference_divergence() {
        let geom = ReferenceGeometry::default();
        let eta = sample_eta(geom.length);
        let (r, t, z) = (0.7, 1.9, 0.9);
        let node = MapNode::at(&geom, r, t, z, &eta.eval_jet(t, z), None);
        let v = phi(r, t, z);
        let g = frame_grad(r, &v, &phi_partials(r, t, z));
        let (_, grad) = forward_jet(&node, &v, &g);
        let div_ref = g[0][0] + g[1][1] + g[2][2];
        let div_img = grad[0][0] + grad[1][1] + grad[2][2];
        assert!((div_img - div_ref * r / node.det()).abs() < 1e-8);
    }

    #[test]
    fn rate_matches_time_differences() {
        let geom = ReferenceGeometry::default();
        let eta = sample_eta(geom.length);
        let rate = eta.scale(0.7);
        let (r, t, z) = (0.85, 0.9, 1.2);
        // motion eta(t) = eta + tau * rate; physical point fixed
        let field_at = |tau: f64, x: [f64; 3]| {
            let e = eta.add(&rate.scale(tau));
            let node = MapNode::at(&geom, x[0], x[1], x[2], &e.eval_jet(x[1], x[2]), None);
            matvec(&piola_matrix(&node), &phi(x[0], x[1], x[2]))
        };
        let node = MapNode::at(&geom, r, t, z, &eta.eval_jet(t, z), Some(&rate.eval_jet(t, z)));
        let target = node.radius();
        let pre = |tau: f64| {
            let e = eta.add(&rate.scale(tau));
            crate::geometry::invert_map(&geom, &e, [target, t, z])
        };
        let h = 1e-5;
        let fd: Vec<f64> = (0..3)
            .map(|i| (field_at(h, pre(h))[i] - field_at(-h, pre(-h))[i]) / (2.0 * h))
            .collect();
        let v = phi(r, t, z);
        let g = frame_grad(r, &v, &phi_partials(r, t, z));
        let (_, grad) = forward_jet(&node, &v, &g);
        let mine = eulerian_rate(&node, &v, &[0.0; 3], &grad);
        for i in 0..3 {
            assert!((mine[i] - fd[i]).abs() < 1e-6, "{i}: {} vs {}", mine[i], fd[i]);
        }
    }

    #[test]
    fn normal_trace_identity_algebra() {
        let d = normal_trace_defect(1.0, 0.13, -0.4, 0.25, &[0.3, -1.2, 0.8]);
        assert!(d.abs() < 1e-15);
    }
}
