//! Variational forms on the deformed domain.
//!
//! Every integral is a pulled-back quadrature sum over reference nodes.
//! Volume fields are [`VectorTable`]s holding frame components and physical
//! frame gradients at the mapped nodes; wall fields are per-surface-node
//! vectors of the trace `u ∘ φ_δ`.

use crate::error::{Error, Result};
use crate::geometry::{surface_frame, to_cartesian, DomainMap, ReferenceGeometry, SurfaceFrame};
use crate::numerics::{dot3, norm3, pairwise_sum_by};
use crate::spaces::{lp_norm, DiskGrid, Grad3, ShellJet, SurfaceGrid, VectorTable};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Pulled-back weights for `Ω^δ(t)` and `Γ^δ(t)`.
#[derive(Clone, Debug)]
pub struct DeformedQuadrature {
    /// `det∇ψ_δ · w` per volume node.
    pub volume: Vec<f64>,
    /// `J_δ · w` per surface node.
    pub surface: Vec<f64>,
    /// `w` per surface node (flat measure on `ω`).
    pub flat: Vec<f64>,
    pub frame: SurfaceFrame,
    /// `(R + δ) ∂_tδ` per surface node: the normal wall speed times `J_δ`.
    pub normal_flux: Vec<f64>,
}

impl DeformedQuadrature {
    /// `delta` and `rate` are jets of `δ` and `∂_tδ` on `map.grid.surface()`.
    pub fn new(map: &DomainMap, delta: &[ShellJet], rate: Option<&[ShellJet]>) -> Result<Self> {
        let surf = map.grid.surface();
        let frame = surface_frame(&map.geometry, delta)?;
        let flat = surf.weights();
        let surface = frame.jacobian.iter().zip(&flat).map(|(j, w)| j * w).collect();
        let normal_flux = match rate {
            Some(r) => delta
                .iter()
                .zip(r)
                .map(|(d, q)| (map.geometry.radius + d.value) * q.value)
                .collect(),
            None => vec![0.0; delta.len()],
        };
        let volume = map.volume_weights();
        debug_assert!(volume.iter().all(|w| *w > 0.0));
        Ok(DeformedQuadrature {
            volume,
            surface,
            flat,
            frame,
            normal_flux,
        })
    }
}

#[inline]
pub fn sym_grad(g: &Grad3) -> Grad3 {
    let mut d = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = 0.5 * (g[i][j] + g[j][i]);
        }
    }
    d
}

#[inline]
pub fn double_dot(a: &Grad3, b: &Grad3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}

/// `(a · ∇) v` from the frame gradient of `v`.
#[inline]
pub fn directional(g: &Grad3, a: &[f64; 3]) -> [f64; 3] {
    [
        g[0][0] * a[0] + g[0][1] * a[1] + g[0][2] * a[2],
        g[1][0] * a[0] + g[1][1] * a[1] + g[1][2] * a[2],
        g[2][0] * a[0] + g[2][1] * a[1] + g[2][2] * a[2],
    ]
}

/// `∫ 𝔻u : 𝔻q`.
pub fn sym_grad_form(u: &VectorTable, q: &VectorTable, weights: &[f64]) -> f64 {
    pairwise_sum_by(0, weights.len(), &|i| {
        weights[i] * double_dot(&sym_grad(&u.grads[i]), &sym_grad(&q.grads[i]))
    })
}

/// `b = ½∫(a·∇)v·w − ½∫(a·∇)w·v` with advecting field `a`.
pub fn convective_form(advect: &[[f64; 3]], v: &VectorTable, w: &VectorTable, weights: &[f64]) -> f64 {
    pairwise_sum_by(0, weights.len(), &|i| {
        let a = &advect[i];
        let lhs = dot3(&directional(&v.grads[i], a), &w.values[i]);
        let rhs = dot3(&directional(&w.grads[i], a), &v.values[i]);
        weights[i] * 0.5 * (lhs - rhs)
    })
}

/// `(1/α)∫(u∘φ − ∂_tη e_r)·(q∘φ − ξ e_r) J`.
pub fn slip_form(
    u_trace: &[[f64; 3]],
    eta_rate: &[f64],
    q_trace: &[[f64; 3]],
    xi: &[f64],
    surface_weights: &[f64],
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidSlipLength(alpha));
    }
    Ok(pairwise_sum_by(0, surface_weights.len(), &|i| {
        let a = slip_vector(&u_trace[i], eta_rate[i]);
        let b = slip_vector(&q_trace[i], xi[i]);
        surface_weights[i] * dot3(&a, &b)
    }) / alpha)
}

#[inline]
pub fn slip_vector(trace: &[f64; 3], normal_speed: f64) -> [f64; 3] {
    [trace[0] - normal_speed, trace[1], trace[2]]
}

/// Orthonormal tangents of `Γ^δ` at a node (Gram–Schmidt on `τ₁, τ₂`).
pub fn unit_tangents(frame: &SurfaceFrame, i: usize) -> [[f64; 3]; 2] {
    let t1 = frame.tau1[i];
    let n1 = norm3(&t1);
    let e1 = t1.map(|x| x / n1);
    let t2 = frame.tau2[i];
    let c = dot3(&t2, &e1);
    let p = [t2[0] - c * e1[0], t2[1] - c * e1[1], t2[2] - c * e1[2]];
    let n2 = norm3(&p);
    [e1, p.map(|x| x / n2)]
}

/// `−½∫_{Γ^δ}(u·q)(∂_tδ e_r ∘ φ⁻¹)·ν dA_δ`, pulled back to `ω`.
pub fn interface_transport_form(u_trace: &[[f64; 3]], q_trace: &[[f64; 3]], quad: &DeformedQuadrature) -> f64 {
    -0.5 * pairwise_sum_by(0, quad.flat.len(), &|i| {
        quad.flat[i] * quad.normal_flux[i] * dot3(&u_trace[i], &q_trace[i])
    })
}

/// `∫_{Γ_in} q·ν dA` and `∫_{Γ_out} q·ν dA` with `ν_out = e_z` and
/// `ν_in = −sign · e_z`.
pub fn disk_fluxes(
    grid: &DiskGrid,
    inlet: &[[f64; 3]],
    outlet: &[[f64; 3]],
    inflow_normal_sign: f64,
) -> (f64, f64) {
    let flux = |vals: &[[f64; 3]]| {
        pairwise_sum_by(0, grid.len(), &|i| {
            let (r, _) = grid.point(i);
            r * grid.param_weight(i) * vals[i][2]
        })
    };
    (-inflow_normal_sign * flux(inlet), flux(outlet))
}

/// `⟨F, q⟩ = P_in ∫_{Γ_in} q·ν − P_out ∫_{Γ_out} q·ν`.
pub fn forcing(fluxes: (f64, f64), p_in: f64, p_out: f64) -> f64 {
    p_in * fluxes.0 - p_out * fluxes.1
}

/// `u ∘ φ_δ` at the nodes of `grid` for a field given at deformed
/// cylindrical points.
pub fn trace_eval(
    geom: &ReferenceGeometry,
    delta: &[ShellJet],
    grid: &SurfaceGrid,
    field: &dyn Fn([f64; 3]) -> [f64; 3],
) -> Vec<[f64; 3]> {
    (0..grid.len())
        .map(|i| {
            let (t, z) = grid.point(i);
            field([geom.radius + delta[i].value, t, z])
        })
        .collect()
}

/// Energy functionals at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub fluid_kinetic: f64,
    pub shell_kinetic: f64,
    pub elastic: f64,
    pub dissipation: f64,
    pub slip: f64,
}

impl EnergyReport {
    pub fn total(&self) -> f64 {
        self.fluid_kinetic + self.shell_kinetic + self.elastic
    }
}

/// `E`, `D`, `E_slip` from node tables; `elastic` is supplied by the shell
/// model (`½∫|∇²η|²` or `½K(η)`).
pub fn energy_report(
    u: &VectorTable,
    u_trace: &[[f64; 3]],
    eta_rate: &[f64],
    elastic: f64,
    quad: &DeformedQuadrature,
    alpha: f64,
) -> Result<EnergyReport> {
    let fluid = 0.5 * pairwise_sum_by(0, quad.volume.len(), &|i| quad.volume[i] * dot3(&u.values[i], &u.values[i]));
    let shell = 0.5 * pairwise_sum_by(0, quad.flat.len(), &|i| quad.flat[i] * eta_rate[i] * eta_rate[i]);
    let diss = sym_grad_form(u, u, &quad.volume);
    let slip = slip_form(u_trace, eta_rate, u_trace, eta_rate, &quad.surface, alpha)?;
    Ok(EnergyReport {
        fluid_kinetic: fluid,
        shell_kinetic: shell,
        elastic,
        dissipation: diss,
        slip,
    })
}

/// `‖∇q‖_{L^r} / (‖𝔻q‖_{L^p} + ‖q‖_{L^p})`.
pub fn korn_ratio(q: &VectorTable, weights: &[f64], p: f64, r: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite() && r >= 1.0 && r < p) {
        return Err(Error::InvalidArgument(format!("korn exponents p = {p}, r = {r}")));
    }
    let frob = |g: &Grad3| g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let grad: Vec<f64> = q.grads.iter().map(frob).collect();
    let sym: Vec<f64> = q.grads.iter().map(|g| frob(&sym_grad(g))).collect();
    let val: Vec<f64> = q.values.iter().map(norm3).collect();
    let den = lp_norm(&sym, weights, p) + lp_norm(&val, weights, p);
    if !(den > 0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(lp_norm(&grad, weights, r) / den)
}

/// `‖d^{1−β}∇q‖_{L^p}` with the sampled distance function `d`.
pub fn korn_weighted(q: &VectorTable, weights: &[f64], distance: &[f64], beta: f64, p: f64) -> f64 {
    let vals: Vec<f64> = q
        .grads
        .iter()
        .zip(distance)
        .map(|(g, d)| d.powf(1.0 - beta) * g.iter().flatten().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    lp_norm(&vals, weights, p)
}

/// Distance from each mapped volume node to a dense sample of `∂Ω^δ`
/// (wall `Γ^δ` on the surface grid plus both end disks on `disk`).
/// The error is bounded by the sample spacing.
pub fn distance_to_boundary(map: &DomainMap, delta: &[ShellJet], disk: &DiskGrid) -> Vec<f64> {
    let surf = map.grid.surface();
    let geom = &map.geometry;
    let mut boundary: Vec<[f64; 3]> = (0..surf.len())
        .map(|i| {
            let (t, z) = surf.point(i);
            to_cartesian([geom.radius + delta[i].value, t, z])
        })
        .collect();
    for z in [0.0, geom.length] {
        for i in 0..disk.len() {
            let (r, t) = disk.point(i);
            boundary.push(to_cartesian([r, t, z]));
        }
    }
    map.nodes
        .iter()
        .map(|n| {
            let x = to_cartesian(n.mapped());
            boundary.iter().fold(f64::INFINITY, |m, b| {
                let d = [x[0] - b[0], x[1] - b[1], x[2] - b[2]];
                m.min(norm3(&d))
            })
        })
        .collect()
}

/// Time profile of one boundary pressure.
#[derive(Clone, Debug, PartialEq)]
pub enum PressureProfile {
    Constant(f64),
    /// `amplitude · sin²(π(t − t0)/width)` on `[t0, t0 + width]`, else 0.
    Pulse { t0: f64, width: f64, amplitude: f64 },
    /// Piecewise-cubic Hermite interpolation of samples; slopes by centred
    /// differences, held constant outside the sample range.
    Samples { t: Vec<f64>, p: Vec<f64> },
}

impl PressureProfile {
    /// Parses `constant`, `constant(c)`, `zero`, `pulse(t0,width,amplitude)`,
    /// or a path to a two-column `(t, P)` CSV file.
    pub fn parse(spec: &str, base_dir: Option<&Path>) -> Result<Self> {
        let s = spec.trim();
        let args = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad number '{a}' in pressure profile '{s}'")))
                })
                .collect()
        };
        if s == "zero" {
            return Ok(PressureProfile::Constant(0.0));
        }
        if s == "constant" {
            return Ok(PressureProfile::Constant(1.0));
        }
        if let Some(body) = s.strip_prefix("constant(").and_then(|b| b.strip_suffix(')')) {
            let a = args(body)?;
            if a.len() != 1 {
                return Err(Error::Parse(format!("constant takes one argument: '{s}'")));
            }
            return Ok(PressureProfile::Constant(a[0]));
        }
        if let Some(body) = s.strip_prefix("pulse(").and_then(|b| b.strip_suffix(')')) {
            let a = args(body)?;
            if a.len() != 3 || !(a[1] > 0.0) {
                return Err(Error::Parse(format!("pulse needs (t0, width > 0, amplitude): '{s}'")));
            }
            return Ok(PressureProfile::Pulse {
                t0: a[0],
                width: a[1],
                amplitude: a[2],
            });
        }
        let path = match base_dir {
            Some(d) if Path::new(s).is_relative() => d.join(s),
            _ => Path::new(s).to_path_buf(),
        };
        Self::from_csv(&path)
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let mut t = Vec::new();
        let mut p = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!("{}:{}: expected two columns", path.display(), line + 1)));
            }
            let parse = |k: usize| {
                rec[k].parse::<f64>().ok().filter(|x| x.is_finite())
            };
            match (parse(0), parse(1)) {
                (Some(a), Some(b)) => {
                    t.push(a);
                    p.push(b);
                }
                _ if line == 0 => continue,
                _ => return Err(Error::Parse(format!("{}:{}: non-numeric row", path.display(), line + 1))),
            }
        }
        Self::from_samples(t, p)
    }

    pub fn from_samples(t: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != p.len() || t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parse("pressure samples need strictly increasing times".into()));
        }
        Ok(PressureProfile::Samples { t, p })
    }

    pub fn eval(&self, time: f64) -> f64 {
        match self {
            PressureProfile::Constant(c) => *c,
            PressureProfile::Pulse { t0, width, amplitude } => {
                let s = (time - t0) / width;
                if (0.0..=1.0).contains(&s) {
                    amplitude * (PI * s).sin().powi(2)
                } else {
                    0.0
                }
            }
            PressureProfile::Samples { t, p } => hermite(t, p, time),
        }
    }

    /// Canonical text form, re-parseable by [`PressureProfile::parse`] for
    /// the built-in profiles.
    pub fn describe(&self) -> String {
        match self {
            PressureProfile::Constant(c) => format!("constant({c:?})"),
            PressureProfile::Pulse { t0, width, amplitude } => format!("pulse({t0:?},{width:?},{amplitude:?})"),
            PressureProfile::Samples { t, .. } => format!("samples({})", t.len()),
        }
    }
}

fn hermite(t: &[f64], p: &[f64], x: f64) -> f64 {
    let n = t.len();
    if n == 1 || x <= t[0] {
        return p[0];
    }
    if x >= t[n - 1] {
        return p[n - 1];
    }
    let k = t.partition_point(|v| *v <= x) - 1;
    let slope = |i: usize| -> f64 {
        if i == 0 {
            (p[1] - p[0]) / (t[1] - t[0])
        } else if i == n - 1 {
            (p[n - 1] - p[n - 2]) / (t[n - 1] - t[n - 2])
        } else {
            (p[i + 1] - p[i - 1]) / (t[i + 1] - t[i - 1])
        }
    };
    let h = t[k + 1] - t[k];
    let s = (x - t[k]) / h;
    let (s2, s3) = (s * s, s * s * s);
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * p[k] + h10 * h * slope(k) + h01 * p[k + 1] + h11 * h * slope(k + 1)
}

/// Inlet and outlet pressure histories.
#[derive(Clone, Debug, PartialEq)]
pub struct ForcingProfile {
    pub inlet: PressureProfile,
    pub outlet: PressureProfile,
}

impl ForcingProfile {
    pub fn zero() -> Self {
        ForcingProfile {
            inlet: PressureProfile::Constant(0.0),
            outlet: PressureProfile::Constant(0.0),
        }
    }

    pub fn at(&self, t: f64) -> (f64, f64) {
        (self.inlet.eval(t), self.outlet.eval(t))
    }

    /// `‖P_in‖²_{L²} + ‖P_out‖²_{L²}` on `[0, T]` by the trapezoid rule on
    /// the given time grid.
    pub fn l2_squared(&self, times: &[f64]) -> f64 {
        let f = |t: f64| {
            let (a, b) = self.at(t);
            a * a + b * b
        };
        pairwise_sum_by(0, times.len().saturating_sub(1), &|j| {
            0.5 * (times[j + 1] - times[j]) * (f(times[j]) + f(times[j + 1]))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Rule1D, VolumeGrid};

    fn gauss_grid(radius: f64, length: f64) -> VolumeGrid {
        VolumeGrid::new(
            Rule1D::composite_gauss(0.0, radius, 1, 6),
            Rule1D::periodic(8),
            Rule1D::composite_gauss(0.0, length, 1, 6),
        )
    }

    fn rest_weights(g: &VolumeGrid) -> Vec<f64> {
        (0..g.len()).map(|i| g.reference_weight(i)).collect()
    }

    fn table(g: &VolumeGrid, f: &dyn Fn(f64, f64, f64) -> ([f64; 3], Grad3)) -> VectorTable {
        let mut t = VectorTable::zeros(g.len(), true);
        for i in 0..g.len() {
            let (r, th, z) = g.point(i);
            let (v, gr) = f(r, th, z);
            t.values[i] = v;
            t.grads[i] = gr;
        }
        t
    }

    #[test]
    fn sym_grad_form_closed_form() {
        let (radius, length) = (1.3, 2.0);
        let g = gauss_grid(radius, length);
        // u = q = r² e_z: 𝔻:𝔻 = 2r²
        let u = table(&g, &|r, _, _| ([0.0, 0.0, r * r], [[0.0; 3], [0.0; 3], [2.0 * r, 0.0, 0.0]]));
        let v = sym_grad_form(&u, &u, &rest_weights(&g));
        let exact = PI * length * radius.powi(4);
        assert!((v - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn rigid_rotation_in_kernel() {
        let g = gauss_grid(1.0, 2.0);
        let rot = table(&g, &|r, _, _| ([0.0, r, 0.0], [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0; 3]]));
        let u = table(&g, &|r, t, z| ([r * z, t.sin(), r], [[z, 0.3, r], [0.1, 0.2, 0.0], [1.0, 0.0, 0.5]]));
        assert!(sym_grad_form(&u, &rot, &rest_weights(&g)).abs() < 1e-13);
    }

    #[test]
    fn convective_closed_form() {
        let (radius, length) = (1.0, 2.0);
        let g = gauss_grid(radius, length);
        let adv = vec![[0.0, 0.0, 1.0]; g.len()];
        let v = table(&g, &|_, _, z| ([0.0, 0.0, z * z], [[0.0; 3], [0.0; 3], [0.0, 0.0, 2.0 * z]]));
        let w = table(&g, &|r, _, _| ([0.0, 0.0, r * r], [[0.0; 3], [0.0; 3], [2.0 * r, 0.0, 0.0]]));
        let b = convective_form(&adv, &v, &w, &rest_weights(&g));
        let exact = 2.0 * PI * radius.powi(4) / 4.0 * length * length / 2.0;
        assert!((b - exact).abs() < 1e-10 * exact);
        let back = convective_form(&adv, &w, &v, &rest_weights(&g));
        assert!((b + back).abs() < 1e-12 * exact);
        assert!(convective_form(&adv, &v, &v, &rest_weights(&g)).abs() < 1e-14);
    }

    #[test]
    fn poiseuille_forcing() {
        let radius = 1.7;
        let disk = DiskGrid {
            r: Rule1D::composite_gauss(0.0, radius, 1, 4),
            theta: Rule1D::periodic(6),
        };
        let prof: Vec<[f64; 3]> = (0..disk.len())
            .map(|i| {
                let (r, _) = disk.point(i);
                [0.0, 0.0, 1.0 - (r / radius).powi(2)]
            })
            .collect();
        let f = forcing(disk_fluxes(&disk, &prof, &prof, 1.0), 1.0, 0.0);
        let exact = -PI * radius * radius / 2.0;
        assert!((f - exact).abs() < 1e-10 * exact.abs());
        assert_eq!(forcing(disk_fluxes(&disk, &prof, &prof, 1.0), 0.0, 0.0), 0.0);
    }

    #[test]
    fn slip_form_rejects_nonpositive_alpha() {
        assert!(matches!(slip_form(&[], &[], &[], &[], &[], 0.0), Err(Error::InvalidSlipLength(_))));
    }

    #[test]
    fn pressure_profiles_parse() {
        assert_eq!(PressureProfile::parse("constant", None).unwrap().eval(3.0), 1.0);
        assert_eq!(PressureProfile::parse("constant(2.5)", None).unwrap().eval(0.0), 2.5);
        let p = PressureProfile::parse("pulse(0.1, 0.2, 4)", None).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert!((p.eval(0.2) - 4.0).abs() < 1e-12);
        assert!(PressureProfile::parse("pulse(0,0,1)", None).is_err());
        let re = PressureProfile::parse(&p.describe(), None).unwrap();
        assert_eq!(re, p);
    }

    #[test]
    fn hermite_reproduces_cubic_samples_at_nodes() {
        let t: Vec<f64> = (0..6).map(|i| i as f64 * 0.5).collect();
        let p: Vec<f64> = t.iter().map(|x| x * x).collect();
        let prof = PressureProfile::from_samples(t.clone(), p.clone()).unwrap();
        for (a, b) in t.iter().zip(&p) {
            assert!((prof.eval(*a) - b).abs() < 1e-14);
        }
        // centred slopes are exact for quadratics at interior nodes
        assert!((prof.eval(1.25) - 1.5625).abs() < 1e-12);
    }

    #[test]
    fn tangential_decomposition_of_slip_integrand() {
        use crate::geometry::ReferenceGeometry;
        let geom = ReferenceGeometry::default();
        let jets: Vec<ShellJet> = (0..7)
            .map(|k| {
                let x = k as f64 * 0.37;
                ShellJet {
                    value: 0.1 * x.sin(),
                    d_theta: 0.2 * x.cos(),
                    d_z: -0.15 * (2.0 * x).sin(),
                    ..Default::default()
                }
            })
            .collect();
        let frame = surface_frame(&geom, &jets).unwrap();
        for i in 0..jets.len() {
            let n = frame.unit_normal[i];
            let strip = |v: [f64; 3]| {
                let c = dot3(&v, &n);
                [v[0] - c * n[0], v[1] - c * n[1], v[2] - c * n[2]]
            };
            let a = strip([0.3 + i as f64, -0.7, 0.2]);
            let b = strip([1.1, 0.4 * i as f64, -0.5]);
            let [t1, t2] = unit_tangents(&frame, i);
            let split = dot3(&a, &t1) * dot3(&b, &t1) + dot3(&a, &t2) * dot3(&b, &t2);
            assert!((dot3(&a, &b) - split).abs() < 1e-10);
        }
    }
}
