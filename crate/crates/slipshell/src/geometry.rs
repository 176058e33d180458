//! Reference cylinder, radial cutoff, deformed-surface frames, the
//! reference-to-deformed map `ψ_η` and contact detection.
//!
//! Volume quantities are stored in cylindrical frame components at
//! reference nodes. The stored determinant is `(1 + ∂_r η̃)(r + η̃)`, which
//! already contains the cylindrical factor, so the deformed volume element
//! is `detG · dr dθ dz` and equals `r dr dθ dz` at rest.

use crate::error::{Error, Result};
use crate::numerics::{cross3, norm3, smoothstep5, SMOOTHSTEP5_MAX_SLOPE};
use crate::spaces::{ShellField, ShellJet, SurfaceGrid, VolumeGrid};
use serde::{Deserialize, Serialize};

/// Cylinder of radius `R` and length `L` with the cutoff radii and the
/// admissibility caps used by the domain map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceGeometry {
    pub radius: f64,
    pub length: f64,
    /// `a`: the cutoff vanishes on `(0, a)`.
    pub cutoff_inner: f64,
    /// `b`: the cutoff equals one on `(R - b, R)`.
    pub cutoff_outer: f64,
    /// `M`: sup-norm cap for admissible displacements.
    pub bound: f64,
    /// Minimum allowed `R + η`.
    pub margin: f64,
}

impl Default for ReferenceGeometry {
    fn default() -> Self {
        Self::with_defaults(1.0, 2.0)
    }
}

impl ReferenceGeometry {
    /// Defaults `a = b = R/4`, `M = R/4`, margin `R/20`.
    pub fn with_defaults(radius: f64, length: f64) -> Self {
        ReferenceGeometry {
            radius,
            length,
            cutoff_inner: 0.25 * radius,
            cutoff_outer: 0.25 * radius,
            bound: 0.25 * radius,
            margin: 0.05 * radius,
        }
    }

    /// Lists violated invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.radius > 0.0) {
            v.push(format!("radius must be > 0 (got {})", self.radius));
        }
        if !(self.length > 0.0) {
            v.push(format!("length must be > 0 (got {})", self.length));
        }
        if !(self.cutoff_inner > 0.0) || !(self.cutoff_outer > 0.0) {
            v.push("cutoff radii must be > 0".into());
        }
        if !(self.cutoff_inner < self.radius - self.cutoff_outer) {
            v.push("cutoff requires a < R - b".into());
        }
        if !(self.bound > 0.0 && self.bound < self.radius) {
            v.push("bound M must satisfy 0 < M < R".into());
        }
        if !(self.margin >= 0.0 && self.margin < self.radius) {
            v.push("margin must satisfy 0 ≤ margin < R".into());
        }
        v
    }

    /// `ρ(r)`, `ρ'(r)`, `ρ''(r)` of the quintic smoothstep cutoff.
    #[inline]
    pub fn cutoff(&self, r: f64) -> [f64; 3] {
        let width = self.radius - self.cutoff_outer - self.cutoff_inner;
        let [v, d1, d2] = smoothstep5((r - self.cutoff_inner) / width);
        [v, d1 / width, d2 / (width * width)]
    }

    pub fn cutoff_max_slope(&self) -> f64 {
        SMOOTHSTEP5_MAX_SLOPE / (self.radius - self.cutoff_outer - self.cutoff_inner)
    }

    /// Enforces `ρ' < 1/M`.
    pub fn check_cutoff(&self) -> Result<()> {
        let max_slope = self.cutoff_max_slope();
        if max_slope * self.bound >= 1.0 {
            return Err(Error::InvalidCutoff {
                max_slope,
                limit: 1.0 / self.bound,
            });
        }
        Ok(())
    }
}

/// Tangents, normals and area factor of `Γ^η` at surface nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceFrame {
    pub tau1: Vec<[f64; 3]>,
    pub tau2: Vec<[f64; 3]>,
    pub normal: Vec<[f64; 3]>,
    pub unit_normal: Vec<[f64; 3]>,
    pub jacobian: Vec<f64>,
}

fn sup_abs(jets: &[ShellJet]) -> f64 {
    jets.iter().fold(0.0_f64, |m, j| m.max(j.value.abs()))
}

fn guard_contact(geom: &ReferenceGeometry, jets: &[ShellJet]) -> Result<()> {
    let s = sup_abs(jets);
    if !(s < geom.radius) {
        return Err(Error::ContactViolation {
            sup_abs: s,
            radius: geom.radius,
        });
    }
    Ok(())
}

/// Frame of the deformed wall in cylindrical components.
pub fn surface_frame(geom: &ReferenceGeometry, eta: &[ShellJet]) -> Result<SurfaceFrame> {
    guard_contact(geom, eta)?;
    let n = eta.len();
    let mut f = SurfaceFrame {
        tau1: Vec::with_capacity(n),
        tau2: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
        unit_normal: Vec::with_capacity(n),
        jacobian: Vec::with_capacity(n),
    };
    for j in eta {
        let s = geom.radius + j.value;
        let t1 = [j.d_theta, s, 0.0];
        let t2 = [j.d_z, 0.0, 1.0];
        let nn = cross3(&t1, &t2);
        let jac = norm3(&nn);
        f.tau1.push(t1);
        f.tau2.push(t2);
        f.normal.push(nn);
        f.unit_normal.push(nn.map(|x| x / jac));
        f.jacobian.push(jac);
    }
    Ok(f)
}

/// Area factor `√((R+η)²(1+(∂_zη)²) + (∂_θη)²)`.
pub fn jacobian(geom: &ReferenceGeometry, eta: &[ShellJet]) -> Result<Vec<f64>> {
    guard_contact(geom, eta)?;
    Ok(eta
        .iter()
        .map(|j| {
            let s = geom.radius + j.value;
            (s * s * (1.0 + j.d_z * j.d_z) + j.d_theta * j.d_theta).sqrt()
        })
        .collect())
}

/// `η̃ = ρ(r) η` with all first and second derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtendedJet {
    pub value: f64,
    pub d_r: f64,
    pub d_theta: f64,
    pub d_z: f64,
    pub d_rr: f64,
    pub d_rt: f64,
    pub d_rz: f64,
    pub d_tt: f64,
    pub d_tz: f64,
    pub d_zz: f64,
}

/// Time derivatives `∂_t η̃` and its first spatial derivatives.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtendedRate {
    pub value: f64,
    pub d_r: f64,
    pub d_theta: f64,
    pub d_z: f64,
}

/// Radial extension of one surface jet to radius `r`.
#[inline]
pub fn radial_extension(geom: &ReferenceGeometry, eta: &ShellJet, r: f64) -> ExtendedJet {
    let [rho, d1, d2] = geom.cutoff(r);
    ExtendedJet {
        value: rho * eta.value,
        d_r: d1 * eta.value,
        d_theta: rho * eta.d_theta,
        d_z: rho * eta.d_z,
        d_rr: d2 * eta.value,
        d_rt: d1 * eta.d_theta,
        d_rz: d1 * eta.d_z,
        d_tt: rho * eta.d_tt,
        d_tz: rho * eta.d_tz,
        d_zz: rho * eta.d_zz,
    }
}

#[inline]
pub fn radial_extension_rate(geom: &ReferenceGeometry, rate: &ShellJet, r: f64) -> ExtendedRate {
    let [rho, d1, _] = geom.cutoff(r);
    ExtendedRate {
        value: rho * rate.value,
        d_r: d1 * rate.value,
        d_theta: rho * rate.d_theta,
        d_z: rho * rate.d_z,
    }
}

/// Map data at one volume node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MapNode {
    pub r: f64,
    pub theta: f64,
    pub z: f64,
    pub ext: ExtendedJet,
    pub rate: ExtendedRate,
}

impl MapNode {
    /// Node at `(r, θ, z)` from the surface jets of `η` and `∂_t η` above it.
    pub fn at(
        geom: &ReferenceGeometry,
        r: f64,
        theta: f64,
        z: f64,
        eta: &ShellJet,
        rate: Option<&ShellJet>,
    ) -> Self {
        Self::from_cutoff(r, theta, z, geom.cutoff(r), eta, rate)
    }

    fn from_cutoff(
        r: f64,
        theta: f64,
        z: f64,
        cutoff: [f64; 3],
        e: &ShellJet,
        rate: Option<&ShellJet>,
    ) -> Self {
        let [rho, d1, d2] = cutoff;
        let ext = ExtendedJet {
            value: rho * e.value,
            d_r: d1 * e.value,
            d_theta: rho * e.d_theta,
            d_z: rho * e.d_z,
            d_rr: d2 * e.value,
            d_rt: d1 * e.d_theta,
            d_rz: d1 * e.d_z,
            d_tt: rho * e.d_tt,
            d_tz: rho * e.d_tz,
            d_zz: rho * e.d_zz,
        };
        let rate = match rate {
            Some(q) => ExtendedRate {
                value: rho * q.value,
                d_r: d1 * q.value,
                d_theta: rho * q.d_theta,
                d_z: rho * q.d_z,
            },
            None => ExtendedRate::default(),
        };
        MapNode {
            r,
            theta,
            z,
            ext,
            rate,
        }
    }

    /// `r + η̃`, the deformed radius.
    #[inline]
    pub fn radius(&self) -> f64 {
        self.r + self.ext.value
    }

    /// `1 + ∂_r η̃`.
    #[inline]
    pub fn stretch(&self) -> f64 {
        1.0 + self.ext.d_r
    }

    /// `(1 + ∂_r η̃)(r + η̃)`.
    #[inline]
    pub fn det(&self) -> f64 {
        self.stretch() * self.radius()
    }

    /// `∇ψ_η` in the cylindrical layout
    /// `[[1+∂_rη̃, ∂_θη̃, ∂_zη̃], [0, r+η̃, 0], [0, 0, 1]]`.
    #[inline]
    pub fn gradient(&self) -> [[f64; 3]; 3] {
        [
            [self.stretch(), self.ext.d_theta, self.ext.d_z],
            [0.0, self.radius(), 0.0],
            [0.0, 0.0, 1.0],
        ]
    }

    /// Mapped point `ψ_η(r, θ, z)` in cylindrical coordinates.
    #[inline]
    pub fn mapped(&self) -> [f64; 3] {
        [self.radius(), self.theta, self.z]
    }
}

/// `ψ_η` and its derivatives at every node of a volume grid.
#[derive(Clone, Debug)]
pub struct DomainMap {
    pub geometry: ReferenceGeometry,
    pub grid: VolumeGrid,
    pub nodes: Vec<MapNode>,
}

/// Builds the map from surface jets of `η` (and optionally `∂_t η`) given on
/// the surface grid of `grid`.
pub fn domain_map(
    geom: &ReferenceGeometry,
    grid: &VolumeGrid,
    eta: &[ShellJet],
    rate: Option<&[ShellJet]>,
) -> Result<DomainMap> {
    let nr = grid.r.len();
    assert_eq!(eta.len() * nr, grid.len());
    let mut nodes = Vec::with_capacity(grid.len());
    let rhos: Vec<[f64; 3]> = grid.r.nodes.iter().map(|r| geom.cutoff(*r)).collect();
    for idx in 0..grid.len() {
        let (ir, col) = grid.split(idx);
        let (r, theta, z) = grid.point(idx);
        let node = MapNode::from_cutoff(r, theta, z, rhos[ir], &eta[col], rate.map(|rt| &rt[col]));
        let det = node.det();
        if !(det > 0.0) {
            return Err(Error::DegenerateMap { det, node: idx });
        }
        nodes.push(node);
    }
    Ok(DomainMap {
        geometry: *geom,
        grid: grid.clone(),
        nodes,
    })
}

impl DomainMap {
    /// Deformed volume weights `detG · w_r w_θ w_z`.
    pub fn volume_weights(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| n.det() * self.grid.param_weight(i))
            .collect()
    }
}

/// Result of the closure-prevention predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactReport {
    pub admissible: bool,
    pub min_radius: f64,
    pub offending: Vec<usize>,
}

/// `R + η ≥ margin` at every node.
pub fn contact_check(geom: &ReferenceGeometry, eta: &[ShellJet], margin: f64) -> ContactReport {
    let mut offending = Vec::new();
    let mut min_radius = f64::INFINITY;
    for (i, j) in eta.iter().enumerate() {
        let rr = geom.radius + j.value;
        min_radius = min_radius.min(rr);
        if !(rr >= margin) {
            offending.push(i);
        }
    }
    ContactReport {
        admissible: offending.is_empty(),
        min_radius,
        offending,
    }
}

/// Reference preimage of a deformed point `(r', θ, z)` by Newton iteration
/// on `r + ρ(r) η(θ, z) = r'`.
pub fn invert_map(geom: &ReferenceGeometry, eta: &ShellField, point: [f64; 3]) -> [f64; 3] {
    let [rp, theta, z] = point;
    let e = eta.eval(theta, z);
    let mut r = rp - e * geom.cutoff(rp)[0];
    for _ in 0..60 {
        let [rho, d1, _] = geom.cutoff(r);
        let f = r + rho * e - rp;
        let df = 1.0 + d1 * e;
        let step = f / df;
        r -= step;
        if step.abs() < 1e-15 * geom.radius {
            break;
        }
    }
    [r, theta, z]
}

/// Cylindrical point to Cartesian.
pub fn to_cartesian(p: [f64; 3]) -> [f64; 3] {
    let (s, c) = p[1].sin_cos();
    [p[0] * c, p[0] * s, p[2]]
}

/// Cylindrical frame components at angle `theta` to Cartesian components.
pub fn frame_to_cartesian(theta: f64, v: [f64; 3]) -> [f64; 3] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]]
}

/// Samples of `η` on a grid, as jets.
pub fn eval_surface(eta: &ShellField, grid: &SurfaceGrid) -> Vec<ShellJet> {
    eta.eval_grid(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Poly;
    use crate::spaces::Parity;

    fn sample_eta(length: f64) -> ShellField {
        // 0.05 sin θ sin²(πz/L) is not polynomial; use a clamped polynomial analogue
        let prof = ShellField::profile_in_z(length, &Poly::from_coeffs(vec![0.0, 0.0, 1.0, -2.0 / length, 1.0 / (length * length)]));
        ShellField::mode(length, 1, Parity::Sin, prof.scale(0.2))
    }

    #[test]
    fn zero_displacement_frame() {
        let g = ReferenceGeometry::default();
        let jets = vec![ShellJet::default(); 5];
        let f = surface_frame(&g, &jets).unwrap();
        for i in 0..5 {
            assert_eq!(f.tau1[i], [0.0, 1.0, 0.0]);
            assert_eq!(f.tau2[i], [0.0, 0.0, 1.0]);
            assert_eq!(f.unit_normal[i], [1.0, 0.0, 0.0]);
            assert_eq!(f.jacobian[i], 1.0);
        }
    }

    #[test]
    fn contact_violation_reported() {
        let g = ReferenceGeometry::default();
        let jets = vec![ShellJet::constant(-1.0)];
        assert!(matches!(surface_frame(&g, &jets), Err(Error::ContactViolation { .. })));
        assert!(jacobian(&g, &jets).is_err());
    }

    #[test]
    fn cutoff_profile_limits() {
        let g = ReferenceGeometry::default();
        assert_eq!(g.cutoff(0.1), [0.0, 0.0, 0.0]);
        assert_eq!(g.cutoff(0.9), [1.0, 0.0, 0.0]);
        assert_eq!(g.cutoff(1.0)[0], 1.0);
        assert!(g.check_cutoff().is_ok());
        let tight = ReferenceGeometry {
            bound: 0.5,
            ..g
        };
        assert!(matches!(tight.check_cutoff(), Err(Error::InvalidCutoff { .. })));
    }

    #[test]
    fn identity_map_at_rest() {
        let g = ReferenceGeometry::default();
        let grid = VolumeGrid::midpoint(1.0, 2.0, 4, 4, 4);
        let jets = vec![ShellJet::default(); grid.surface().len()];
        let map = domain_map(&g, &grid, &jets, None).unwrap();
        for (i, n) in map.nodes.iter().enumerate() {
            let (r, _, _) = grid.point(i);
            assert_eq!(n.mapped()[0], r);
            assert_eq!(n.det(), r);
        }
    }

    #[test]
    fn inversion_round_trip() {
        let g = ReferenceGeometry::default();
        let eta = sample_eta(2.0);
        for &(r, t, z) in &[(0.1, 0.3, 0.5), (0.6, 2.0, 1.0), (0.95, 4.0, 1.5)] {
            let e = eta.eval_jet(t, z);
            let ext = radial_extension(&g, &e, r);
            let back = invert_map(&g, &eta, [r + ext.value, t, z]);
            assert!((back[0] - r).abs() < 1e-12);
        }
    }
}
