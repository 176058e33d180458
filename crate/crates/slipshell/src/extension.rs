//! Divergence-free extensions of shell test functions into the fluid.
//!
//! Both operators split a shell field `ξ` into its θ-mean `ξ̄(z)` and the
//! mean-free remainder. The remainder is lifted through a θ-antiderivative
//! (which is single-valued only for mean-free integrands); the mean is
//! lifted through an axisymmetric radial/axial stream-function pair.
//! For a `ξ` with nonzero net wall flux, the axial part of the lift is
//! nonzero on the end disks, since incompressibility forces the flux out
//! through the ends.

use crate::error::{Error, Result};
use crate::geometry::{DomainMap, MapNode, ReferenceGeometry};
use crate::numerics::{smoothstep5, Poly};
use crate::piola::{eulerian_rate, forward_from_partials, frob, Mat3};
use crate::spaces::{lp_norm, DiskGrid, Grad3, ShellField, ShellJet, SurfaceGrid, VectorTable};

/// Radial blend `α₁`: zero on `[0, (R-M)/2]`, one on `[R-M, R+M]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtensionProfile {
    pub start: f64,
    pub end: f64,
}

impl ExtensionProfile {
    pub fn new(geom: &ReferenceGeometry) -> Self {
        let end = geom.radius - geom.bound;
        ExtensionProfile { start: 0.5 * end, end }
    }

    /// `α₁`, `α₁'`, `α₁''`.
    #[inline]
    pub fn eval(&self, r: f64) -> [f64; 3] {
        let w = self.end - self.start;
        let [v, d1, d2] = smoothstep5((r - self.start) / w);
        [v, d1 / w, d2 / (w * w)]
    }
}

/// Shell-side data of one test field, shared by all radii of a column.
#[derive(Clone, Copy, Debug, Default)]
struct Column {
    xi: ShellJet,
    /// `∫₀^θ (ξ - ξ̄)`
    xi_anti: ShellJet,
    /// `δ ξ` (slip) or `(R + δ) ξ` (no-slip)
    prod: ShellJet,
    prod_anti: ShellJet,
    xi_mean: f64,
    prod_mean: f64,
    /// `∫₀^z ξ̄ - ½ ∫₀^L ξ̄`
    xi_axial: f64,
    prod_axial: f64,
    delta: ShellJet,
    delta_rate: f64,
    prod_rate_anti: f64,
    prod_rate_axial: f64,
}

/// Precomputed shell fields of one `ξ` against a fixed `δ`.
struct Prepared {
    length: f64,
    xi: ShellField,
    xi_anti: ShellField,
    prod: ShellField,
    prod_anti: ShellField,
    xi_mean: Poly,
    prod_mean: Poly,
    xi_axial: Poly,
    xi_axial_half: f64,
    prod_axial: Poly,
    prod_axial_half: f64,
    prod_rate_anti: Option<ShellField>,
    prod_rate_axial: Option<(Poly, f64)>,
}

fn axial(length: f64, mean: &Poly) -> (Poly, f64) {
    let p = ShellField::z_antiderivative(length, mean);
    let half = 0.5 * p.eval(1.0);
    (p, half)
}

impl Prepared {
    fn new(xi: &ShellField, prod: ShellField, prod_rate: Option<ShellField>) -> Self {
        let length = xi.length;
        let xi_mean = xi.theta_mean();
        let prod_mean = prod.theta_mean();
        let (xi_axial, xi_axial_half) = axial(length, &xi_mean);
        let (prod_axial, prod_axial_half) = axial(length, &prod_mean);
        Prepared {
            length,
            xi: xi.clone(),
            xi_anti: xi.theta_antiderivative_mean_free(),
            prod_anti: prod.theta_antiderivative_mean_free(),
            prod,
            xi_mean,
            prod_mean,
            xi_axial,
            xi_axial_half,
            prod_axial,
            prod_axial_half,
            prod_rate_anti: prod_rate.as_ref().map(|p| p.theta_antiderivative_mean_free()),
            prod_rate_axial: prod_rate.as_ref().map(|p| axial(length, &p.theta_mean())),
        }
    }

    fn column(&self, theta: f64, z: f64, delta: &ShellJet, delta_rate: f64) -> Column {
        let l = self.length;
        Column {
            xi: self.xi.eval_jet(theta, z),
            xi_anti: self.xi_anti.eval_jet(theta, z),
            prod: self.prod.eval_jet(theta, z),
            prod_anti: self.prod_anti.eval_jet(theta, z),
            xi_mean: ShellField::eval_profile(l, &self.xi_mean, z)[0],
            prod_mean: ShellField::eval_profile(l, &self.prod_mean, z)[0],
            xi_axial: ShellField::eval_profile(l, &self.xi_axial, z)[0] - self.xi_axial_half,
            prod_axial: ShellField::eval_profile(l, &self.prod_axial, z)[0] - self.prod_axial_half,
            delta: *delta,
            delta_rate,
            prod_rate_anti: self.prod_rate_anti.as_ref().map_or(0.0, |f| f.eval(theta, z)),
            prod_rate_axial: self
                .prod_rate_axial
                .as_ref()
                .map_or(0.0, |(p, h)| ShellField::eval_profile(l, p, z)[0] - h),
        }
    }

    fn columns(&self, grid: &SurfaceGrid, delta: &[ShellJet], rate: Option<&[ShellJet]>) -> Vec<Column> {
        (0..grid.len())
            .map(|i| {
                let (t, z) = grid.point(i);
                self.column(t, z, &delta[i], rate.map_or(0.0, |r| r[i].value))
            })
            .collect()
    }
}

/// Values, physical gradients and Eulerian time derivatives at nodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtendedField {
    pub table: VectorTable,
    pub rates: Vec<[f64; 3]>,
}

/// `F^s_δ`: the reference lift `q(ξ)` pushed forward by the Piola transform.
#[derive(Clone, Debug)]
pub struct SlipExtension {
    pub geometry: ReferenceGeometry,
    pub delta: ShellField,
    pub rate: Option<ShellField>,
}

impl SlipExtension {
    pub fn new(geometry: &ReferenceGeometry, delta: &ShellField, rate: Option<&ShellField>) -> Result<Self> {
        let g = crate::spaces::SurfaceGrid::gauss(geometry.length, 4 * delta.max_frequency() + 8, 16);
        let sup = delta.eval_grid(&g).iter().fold(0.0_f64, |m, j| m.max(j.value.abs()));
        if !(sup < geometry.radius) {
            return Err(Error::ContactViolation {
                sup_abs: sup,
                radius: geometry.radius,
            });
        }
        Ok(SlipExtension {
            geometry: *geometry,
            delta: delta.clone(),
            rate: rate.cloned(),
        })
    }

    fn prepare(&self, xi: &ShellField) -> Prepared {
        Prepared::new(
            xi,
            self.delta.mul(xi),
            self.rate.as_ref().map(|r| r.mul(xi)),
        )
    }

    /// `q`, its coordinate partials and its rate at fixed reference point.
    fn lift(&self, r: f64, col: &Column) -> ([f64; 3], Mat3, [f64; 3]) {
        let big_r = self.geometry.radius;
        let [rho, d1, d2] = self.geometry.cutoff(r);
        let x = &col.xi;
        let d = &col.delta;
        let rad = r + rho * d.value;
        let c = rho + r * d1;
        let radial = rho / r + d1;
        let q = [
            rad * x.value / big_r,
            -(2.0 * r * col.xi_anti.value + c * col.prod_anti.value) / big_r,
            -(2.0 * col.xi_axial + radial * col.prod_axial) / big_r,
        ];
        let p = [
            [
                (1.0 + d1 * d.value) * x.value / big_r,
                (rho * d.d_theta * x.value + rad * x.d_theta) / big_r,
                (rho * d.d_z * x.value + rad * x.d_z) / big_r,
            ],
            [
                -(2.0 * col.xi_anti.value + (2.0 * d1 + r * d2) * col.prod_anti.value) / big_r,
                -(2.0 * r * (x.value - col.xi_mean) + c * (col.prod.value - col.prod_mean)) / big_r,
                -(2.0 * r * col.xi_anti.d_z + c * col.prod_anti.d_z) / big_r,
            ],
            [
                -(d1 / r - rho / (r * r) + d2) * col.prod_axial / big_r,
                0.0,
                -(2.0 * col.xi_mean + radial * col.prod_mean) / big_r,
            ],
        ];
        let q_rate = [
            rho * col.delta_rate * x.value / big_r,
            -c * col.prod_rate_anti / big_r,
            -radial * col.prod_rate_axial / big_r,
        ];
        (q, p, q_rate)
    }

    /// Reference lift `q(ξ)` with its frame gradient on the volume grid.
    pub fn reference_lift(&self, map: &DomainMap, xi: &ShellField) -> VectorTable {
        let prep = self.prepare(xi);
        let surf = map.grid.surface();
        let dj = self.delta.eval_grid(&surf);
        let cols = prep.columns(&surf, &dj, None);
        let mut out = VectorTable::zeros(map.nodes.len(), true);
        for (i, node) in map.nodes.iter().enumerate() {
            let (_, col) = map.grid.split(i);
            let (q, p, _) = self.lift(node.r, &cols[col]);
            let r = node.r;
            out.values[i] = q;
            out.grads[i] = [
                [p[0][0], (p[0][1] - q[1]) / r, p[0][2]],
                [p[1][0], (p[1][1] + q[0]) / r, p[1][2]],
                [p[2][0], p[2][1] / r, p[2][2]],
            ];
        }
        out
    }

    /// `F^s_δ(ξ)` on the volume nodes of `map` (which must be built from
    /// the same `δ` and rate).
    pub fn volume(&self, map: &DomainMap, xi: &ShellField) -> ExtendedField {
        let prep = self.prepare(xi);
        let surf = map.grid.surface();
        let dj = self.delta.eval_grid(&surf);
        let rj = self.rate.as_ref().map(|r| r.eval_grid(&surf));
        let cols = prep.columns(&surf, &dj, rj.as_deref());
        let n = map.nodes.len();
        let mut out = ExtendedField {
            table: VectorTable::zeros(n, true),
            rates: vec![[0.0; 3]; n],
        };
        for (i, node) in map.nodes.iter().enumerate() {
            let (_, col) = map.grid.split(i);
            let (q, p, q_rate) = self.lift(node.r, &cols[col]);
            let (w, g) = forward_from_partials(node, &q, &p);
            out.table.values[i] = w;
            out.table.grads[i] = g;
            out.rates[i] = eulerian_rate(node, &q, &q_rate, &g);
        }
        out
    }

    /// Trace `F^s_δ(ξ) ∘ φ_δ` at the surface nodes (reference `r = R`).
    pub fn wall(&self, grid: &SurfaceGrid, xi: &ShellField) -> Vec<[f64; 3]> {
        let prep = self.prepare(xi);
        let dj = self.delta.eval_grid(grid);
        let cols = prep.columns(grid, &dj, None);
        let big_r = self.geometry.radius;
        (0..grid.len())
            .map(|i| {
                let (t, z) = grid.point(i);
                let node = MapNode::at(&self.geometry, big_r, t, z, &dj[i], None);
                let (q, _, _) = self.lift(big_r, &cols[i]);
                crate::piola::matvec(&crate::piola::piola_matrix(&node), &q)
            })
            .collect()
    }

    /// Reference lift `q(ξ)` on an end disk. The Piola transform keeps
    /// fluxes through the planes `z = const`, so disk fluxes of `F^s_δ(ξ)`
    /// are those of `q`.
    pub fn disk_reference(&self, grid: &DiskGrid, xi: &ShellField, outlet: bool) -> Vec<[f64; 3]> {
        let prep = self.prepare(xi);
        let z = if outlet { self.geometry.length } else { 0.0 };
        (0..grid.len())
            .map(|i| {
                let (r, t) = grid.point(i);
                let dj = self.delta.eval_jet(t, z);
                let col = prep.column(t, z, &dj, 0.0);
                self.lift(r, &col).0
            })
            .collect()
    }

    /// Values on an end disk (`z = 0` or `z = L`).
    pub fn disk(&self, grid: &DiskGrid, xi: &ShellField, outlet: bool) -> Vec<[f64; 3]> {
        let prep = self.prepare(xi);
        let z = if outlet { self.geometry.length } else { 0.0 };
        (0..grid.len())
            .map(|i| {
                let (r, t) = grid.point(i);
                let dj = self.delta.eval_jet(t, z);
                let col = prep.column(t, z, &dj, 0.0);
                let node = MapNode::at(&self.geometry, r, t, z, &dj, None);
                let (q, _, _) = self.lift(r, &col);
                crate::piola::matvec(&crate::piola::piola_matrix(&node), &q)
            })
            .collect()
    }
}

/// `F_δ`: the no-slip extension, evaluated at deformed points.
#[derive(Clone, Debug)]
pub struct NoSlipExtension {
    pub geometry: ReferenceGeometry,
    pub profile: ExtensionProfile,
    pub delta: ShellField,
}

impl NoSlipExtension {
    pub fn new(geometry: &ReferenceGeometry, delta: &ShellField) -> Result<Self> {
        let g = crate::spaces::SurfaceGrid::gauss(geometry.length, 4 * delta.max_frequency() + 8, 16);
        let sup = delta.eval_grid(&g).iter().fold(0.0_f64, |m, j| m.max(j.value.abs()));
        if !(sup <= geometry.bound) {
            return Err(Error::ContactViolation {
                sup_abs: sup,
                radius: geometry.radius,
            });
        }
        Ok(NoSlipExtension {
            geometry: *geometry,
            profile: ExtensionProfile::new(geometry),
            delta: delta.clone(),
        })
    }

    fn prepare(&self, xi: &ShellField) -> Prepared {
        let scaled = self
            .delta
            .add(&ShellField::constant(xi.length, self.geometry.radius))
            .mul(xi);
        Prepared::new(xi, scaled, None)
    }

    /// Value and frame gradient at physical radius `rp` over a column.
    fn eval(&self, rp: f64, col: &Column) -> ([f64; 3], Grad3) {
        let [a, a1, a2] = self.profile.eval(rp);
        let s = &col.prod;
        let sig = &col.prod_anti;
        let v = [
            a * s.value / rp,
            -a1 * sig.value,
            -a1 / rp * col.prod_axial,
        ];
        let p = [
            [(a1 * rp - a) * s.value / (rp * rp), a * s.d_theta / rp, a * s.d_z / rp],
            [-a2 * sig.value, -a1 * (s.value - col.prod_mean), -a1 * sig.d_z],
            [-(a2 / rp - a1 / (rp * rp)) * col.prod_axial, 0.0, -a1 / rp * col.prod_mean],
        ];
        let g = [
            [p[0][0], (p[0][1] - v[1]) / rp, p[0][2]],
            [p[1][0], (p[1][1] + v[0]) / rp, p[1][2]],
            [p[2][0], p[2][1] / rp, p[2][2]],
        ];
        (v, g)
    }

    /// `F_δ(ξ)` at the deformed images of the volume nodes.
    pub fn volume(&self, map: &DomainMap, xi: &ShellField) -> VectorTable {
        let prep = self.prepare(xi);
        let surf = map.grid.surface();
        let dj = self.delta.eval_grid(&surf);
        let cols = prep.columns(&surf, &dj, None);
        let mut out = VectorTable::zeros(map.nodes.len(), true);
        for (i, node) in map.nodes.iter().enumerate() {
            let (_, col) = map.grid.split(i);
            let (v, g) = self.eval(node.radius(), &cols[col]);
            out.values[i] = v;
            out.grads[i] = g;
        }
        out
    }

    /// Trace on `Γ^δ` at the surface nodes.
    pub fn wall(&self, grid: &SurfaceGrid, xi: &ShellField) -> Vec<[f64; 3]> {
        let prep = self.prepare(xi);
        let dj = self.delta.eval_grid(grid);
        let cols = prep.columns(grid, &dj, None);
        (0..grid.len())
            .map(|i| self.eval(self.geometry.radius + dj[i].value, &cols[i]).0)
            .collect()
    }
}

/// Sampled ratios of the extension estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExtensionEstimates {
    /// `‖F^s(ξ)‖_{L^p} / ‖ξ‖_{L^{p₁}}`
    pub slip_value: f64,
    /// `‖∇F^s(ξ)‖_{L^q} / (‖ξ‖_{W^{1,q₁}} + ‖ξ‖_{L²})`
    pub slip_gradient: f64,
    /// `‖F_δ(ξ)‖_{W^{1,q}} / ‖(R+δ)ξ‖_{W^{1,q}}`
    pub noslip: f64,
}

/// Exponents for [`extension_estimate_report`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateExponents {
    pub p: f64,
    pub p1: f64,
    pub q: f64,
    pub q1: f64,
}

impl Default for EstimateExponents {
    fn default() -> Self {
        EstimateExponents {
            p: 2.0,
            p1: 4.0,
            q: 1.5,
            q1: 2.0,
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn shell_w1(jets: &[ShellJet], w: &[f64], p: f64) -> (f64, f64) {
    let v: Vec<f64> = jets.iter().map(|j| j.value).collect();
    let g: Vec<f64> = jets.iter().map(|j| j.d_theta.hypot(j.d_z)).collect();
    (lp_norm(&v, w, p), lp_norm(&g, w, p))
}

/// Maxima over `(δ, ξ)` samples of the extension estimate ratios on a
/// volume grid; samples with `ξ ≡ 0` contribute zero.
pub fn extension_estimate_report(
    geom: &ReferenceGeometry,
    grid: &crate::spaces::VolumeGrid,
    samples: &[(ShellField, ShellField)],
    exps: EstimateExponents,
) -> Result<ExtensionEstimates> {
    let surf = grid.surface();
    let sw = surf.weights();
    let mut out = ExtensionEstimates::default();
    for (delta, xi) in samples {
        let dj = delta.eval_grid(&surf);
        let map = crate::geometry::domain_map(geom, grid, &dj, None)?;
        let vw = map.volume_weights();
        let slip = SlipExtension::new(geom, delta, None)?.volume(&map, xi);
        let noslip = NoSlipExtension::new(geom, delta)?.volume(&map, xi);
        let xj = xi.eval_grid(&surf);
        let mags = |t: &VectorTable| -> (Vec<f64>, Vec<f64>) {
            (
                t.values.iter().map(crate::numerics::norm3).collect(),
                t.grads.iter().map(frob).collect(),
            )
        };
        let (sv, sg) = mags(&slip.table);
        let (p1v, _) = shell_w1(&xj, &sw, exps.p1);
        let (q1v, q1g) = shell_w1(&xj, &sw, exps.q1);
        let (l2, _) = shell_w1(&xj, &sw, 2.0);
        out.slip_value = out.slip_value.max(ratio(lp_norm(&sv, &vw, exps.p), p1v));
        out.slip_gradient = out
            .slip_gradient
            .max(ratio(lp_norm(&sg, &vw, exps.q), q1v + q1g + l2));
        let (nv, ng) = mags(&noslip);
        let scaled: Vec<ShellJet> = xj
            .iter()
            .zip(&dj)
            .map(|(x, d)| {
                let s = geom.radius + d.value;
                ShellJet {
                    value: s * x.value,
                    d_theta: d.d_theta * x.value + s * x.d_theta,
                    d_z: d.d_z * x.value + s * x.d_z,
                    ..ShellJet::default()
                }
            })
            .collect();
        let (dv, dg) = shell_w1(&scaled, &sw, exps.q);
        let num = lp_norm(&nv, &vw, exps.q) + lp_norm(&ng, &vw, exps.q);
        out.noslip = out.noslip.max(ratio(num, dv + dg));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{domain_map, surface_frame};
    use crate::numerics::dot3;
    use crate::spaces::{Parity, ShellBasis, VolumeGrid};

    fn setup() -> (ReferenceGeometry, ShellBasis, ShellField) {
        let geom = ReferenceGeometry::default();
        let basis = ShellBasis::build(geom.length, 3, 3);
        let mut delta = basis.field(0).scale(0.2);
        delta.add_scaled(&basis.field(3), 0.15);
        delta.add_scaled(&basis.field(7), -0.1);
        (geom, basis, delta)
    }

    fn xi_sample(basis: &ShellBasis) -> ShellField {
        let mut xi = basis.field(1).scale(0.7);
        xi.add_scaled(&basis.field(0), 0.5);
        xi.add_scaled(&basis.field(5), -0.3);
        xi
    }

    #[test]
    fn profile_limits() {
        let geom = ReferenceGeometry::default();
        let p = ExtensionProfile::new(&geom);
        assert_eq!(p.eval(0.3)[0], 0.0);
        assert_eq!(p.eval(0.75)[0], 1.0);
        assert_eq!(p.eval(1.2), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn slip_divergence_free_and_normal_trace() {
        let (geom, basis, delta) = setup();
        let xi = xi_sample(&basis);
        let rate = basis.field(2).scale(0.4);
        let grid = VolumeGrid::midpoint(geom.radius, geom.length, 6, 8, 6);
        let surf = grid.surface();
        let dj = delta.eval_grid(&surf);
        let rj = rate.eval_grid(&surf);
        let map = domain_map(&geom, &grid, &dj, Some(&rj)).unwrap();
        let ext = SlipExtension::new(&geom, &delta, Some(&rate)).unwrap();
        let lift = ext.reference_lift(&map, &xi);
        for d in lift.divergence() {
            assert!(d.abs() < 1e-12, "{d}");
        }
        let f = ext.volume(&map, &xi);
        for d in f.table.divergence() {
            assert!(d.abs() < 1e-11, "{d}");
        }
        let wall = ext.wall(&surf, &xi);
        let frame = surface_frame(&geom, &dj).unwrap();
        let xj = xi.eval_grid(&surf);
        let mut slip = 0.0_f64;
        for i in 0..surf.len() {
            let nu = frame.unit_normal[i];
            let diff = [wall[i][0] - xj[i].value, wall[i][1], wall[i][2]];
            assert!(dot3(&diff, &nu).abs() < 1e-12);
            slip = slip.max(dot3(&diff, &frame.tau1[i]).abs());
        }
        assert!(slip > 1e-6);
    }

    fn point_grid(r: f64, t: f64, z: f64) -> VolumeGrid {
        let one = |x: f64| crate::spaces::Rule1D {
            nodes: vec![x],
            weights: vec![1.0],
            exact_degree: 0,
        };
        VolumeGrid::new(one(r), one(t), one(z))
    }

    fn slip_at(geom: &ReferenceGeometry, d: &ShellField, rate: &ShellField, xi: &ShellField, r: f64, t: f64, z: f64) -> ExtendedField {
        let grid = point_grid(r, t, z);
        let dj = d.eval_grid(&grid.surface());
        let rj = rate.eval_grid(&grid.surface());
        let map = domain_map(geom, &grid, &dj, Some(&rj)).unwrap();
        SlipExtension::new(geom, d, Some(rate)).unwrap().volume(&map, xi)
    }

    #[test]
    fn slip_rate_matches_time_difference() {
        let (geom, basis, delta) = setup();
        let xi = xi_sample(&basis);
        let rate = basis.field(2).scale(0.4);
        let (r, t, z) = (0.8, 1.3, 0.6);
        let rp = r + geom.cutoff(r)[0] * delta.eval(t, z);
        // fixed physical point, motion δ + τ·rate
        let at = |tau: f64| {
            let d = delta.add(&rate.scale(tau));
            let pre = crate::geometry::invert_map(&geom, &d, [rp, t, z]);
            slip_at(&geom, &d, &rate, &xi, pre[0], t, z)
        };
        let h = 1e-5;
        let (a, b) = (at(h), at(-h));
        let c = slip_at(&geom, &delta, &rate, &xi, r, t, z);
        for i in 0..3 {
            let fd = (a.table.values[0][i] - b.table.values[0][i]) / (2.0 * h);
            assert!((fd - c.rates[0][i]).abs() < 1e-6, "{i}: {fd} vs {}", c.rates[0][i]);
        }
    }

    #[test]
    fn noslip_trace_and_divergence() {
        let (geom, basis, delta) = setup();
        let xi = xi_sample(&basis);
        let grid = VolumeGrid::midpoint(geom.radius, geom.length, 6, 8, 6);
        let surf = grid.surface();
        let dj = delta.eval_grid(&surf);
        let map = domain_map(&geom, &grid, &dj, None).unwrap();
        let ext = NoSlipExtension::new(&geom, &delta).unwrap();
        for d in ext.volume(&map, &xi).divergence() {
            assert!(d.abs() < 1e-12);
        }
        let xj = xi.eval_grid(&surf);
        for (w, x) in ext.wall(&surf, &xi).iter().zip(&xj) {
            assert!((w[0] - x.value).abs() < 1e-14 && w[1] == 0.0 && w[2] == 0.0);
        }
    }

    #[test]
    fn mean_free_field_vanishes_on_disks() {
        let (geom, basis, delta) = setup();
        let idx = (0..basis.len()).find(|&i| basis.modes[i].k == 1 && basis.modes[i].parity == Parity::Cos).unwrap();
        let xi = basis.field(idx);
        let ext = SlipExtension::new(&geom, &delta.scale(0.0), None).unwrap();
        let disk = DiskGrid {
            r: crate::spaces::Rule1D::midpoint(0.0, 1.0, 5),
            theta: crate::spaces::Rule1D::periodic(8),
        };
        for v in ext.disk(&disk, &xi, false).iter().chain(ext.disk(&disk, &xi, true).iter()) {
            assert!(v.iter().all(|c| c.abs() < 1e-14));
        }
    }
}
