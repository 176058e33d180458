//! Interleaved Galerkin system for the decoupled, linearized problem.
//!
//! Basis index `p` (0-based) holds the slip extension of shell mode `p/2`
//! for even `p` and the Piola image of fluid mode `p/2` for odd `p`. With
//! `u = Σ bᵢ Xᵢ`, `η = Σ aᵢ Xᵢ` and `b = ȧ`, row `k` of the system reads
//!
//! `d/dt(M b)_k − (W b)_k + (D + B + S) b + K a + g = f`,
//!
//! where `W_ki = ∫Xᵢ·∂ₜX_k + ½∫div(V Xᵢ·X_k)` and `V = ∂ₜη̃ e_r` is the
//! domain velocity. The transport part is assembled in volume form so that
//! the quadrature sums satisfy `Ṁ = W + Wᵀ` exactly.
//!
//! Time stepping is implicit midpoint with matrices averaged over the two
//! time levels and `(M b)` differenced exactly, giving the balance
//! `ΔE/dt + D + E_slip − ⟨F, u⟩ = O(dt²)`.

use crate::error::{Error, Result};
use crate::extension::SlipExtension;
use crate::forms::{directional, disk_fluxes, sym_grad, DeformedQuadrature, EnergyReport, ForcingProfile};
use crate::geometry::{domain_map, DomainMap, MapNode, ReferenceGeometry};
use crate::koiter::{bending_form, ElasticityTensor, Koiter, MetricConvention, ShellModel};
use crate::numerics::{dot3, pairwise_sum_by};
use crate::piola::{eulerian_rate, forward_jet, matvec, piola_matrix};
use crate::spaces::{
    DiskGrid, FluidReferenceBasis, Grad3, ShellBasis, ShellField, ShellJet, SurfaceGrid, VectorTable, VolumeGrid,
};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Material constants; the defaults are the normalized preset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Physics {
    pub fluid_density: f64,
    pub fluid_viscosity: f64,
    pub shell_density: f64,
    pub shell_thickness: f64,
    pub slip_length: f64,
    pub lame_lambda: f64,
    pub lame_mu: f64,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            fluid_density: 1.0,
            fluid_viscosity: 0.5,
            shell_density: 1.0,
            shell_thickness: 1.0,
            slip_length: 1.0,
            lame_lambda: 1.0,
            lame_mu: 1.0,
        }
    }
}

impl Physics {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, x) in [
            ("physics.fluid_density", self.fluid_density),
            ("physics.fluid_viscosity", self.fluid_viscosity),
            ("physics.shell_density", self.shell_density),
            ("physics.shell_thickness", self.shell_thickness),
            ("physics.slip_length", self.slip_length),
            ("physics.lame_mu", self.lame_mu),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} must be positive (got {x})"));
            }
        }
        if !(self.lame_lambda >= 0.0 && self.lame_lambda.is_finite()) {
            v.push(format!("physics.lame_lambda must be nonnegative (got {})", self.lame_lambda));
        }
        v
    }
}

/// Model switches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelOptions {
    pub shell_model: ShellModel,
    pub metric_convention: MetricConvention,
    /// `+1` takes `ν = −e_z` on the inlet (outward normal), `−1` flips it.
    pub inflow_normal_sign: f64,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            shell_model: ShellModel::Linear,
            metric_convention: MetricConvention::AsPrinted,
            inflow_normal_sign: 1.0,
        }
    }
}

/// Role of a basis index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Shell(usize),
    Fluid(usize),
}

#[inline]
pub fn role(p: usize) -> Role {
    if p % 2 == 0 {
        Role::Shell(p / 2)
    } else {
        Role::Fluid(p / 2)
    }
}

/// A coupled test pair.
#[derive(Clone, Debug)]
pub enum TestPair {
    /// `(F^s_δ(ξ), ξ)`.
    Slip(ShellField),
    /// `(𝒥_δ(Z_i), 0)` for reference fluid mode `i`.
    Fluid(usize),
}

/// Nodal data of a family of coupled fields at one time level.
#[derive(Clone, Debug, Default)]
pub struct FieldTables {
    pub volume: Vec<VectorTable>,
    /// Eulerian time derivatives at the volume nodes.
    pub rates: Vec<Vec<[f64; 3]>>,
    /// Traces `X ∘ φ_δ` at the surface nodes.
    pub wall: Vec<Vec<[f64; 3]>>,
    /// Shell components (`None` for pure fluid fields).
    pub shell: Vec<Option<Vec<ShellJet>>>,
    /// `(∫_{Γ_in} X·ν, ∫_{Γ_out} X·ν)`.
    pub fluxes: Vec<(f64, f64)>,
}

impl FieldTables {
    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }
}

/// Geometry and basis tables at one time level.
#[derive(Clone, Debug)]
pub struct Level {
    pub t: f64,
    pub delta: ShellField,
    pub rate: ShellField,
    pub delta_jets: Vec<ShellJet>,
    pub map: DomainMap,
    pub quad: DeformedQuadrature,
    pub basis: FieldTables,
    pub velocity: Option<Vec<[f64; 3]>>,
}

/// Forms of a test family (rows) against the basis (columns).
#[derive(Clone, Debug)]
pub struct Block {
    pub mass: DMatrix<f64>,
    pub transport: DMatrix<f64>,
    pub viscous: DMatrix<f64>,
    pub convective: DMatrix<f64>,
    pub slip: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub load: DVector<f64>,
    pub flux_in: DVector<f64>,
    pub flux_out: DVector<f64>,
}

impl Block {
    fn average(a: &Block, b: &Block) -> Block {
        let m = |x: &DMatrix<f64>, y: &DMatrix<f64>| (x + y) * 0.5;
        let v = |x: &DVector<f64>, y: &DVector<f64>| (x + y) * 0.5;
        Block {
            mass: m(&a.mass, &b.mass),
            transport: m(&a.transport, &b.transport),
            viscous: m(&a.viscous, &b.viscous),
            convective: m(&a.convective, &b.convective),
            slip: m(&a.slip, &b.slip),
            stiffness: m(&a.stiffness, &b.stiffness),
            load: v(&a.load, &b.load),
            flux_in: v(&a.flux_in, &b.flux_in),
            flux_out: v(&a.flux_out, &b.flux_out),
        }
    }

    /// `⟨F(t), X_k⟩` per row.
    pub fn forcing(&self, p_in: f64, p_out: f64) -> DVector<f64> {
        &self.flux_in * p_in - &self.flux_out * p_out
    }

    /// `(D + B + S)`.
    fn damping(&self) -> DMatrix<f64> {
        &self.viscous + &self.convective + &self.slip
    }
}

/// Prescribed wall motion `δ` on the time levels: coefficients on the
/// Galerkin shell modes plus a constant offset.
#[derive(Clone, Debug, PartialEq)]
pub struct Motion {
    pub offset: f64,
    pub coefficients: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
}

impl Motion {
    /// Time-independent motion.
    pub fn frozen(coefficients: &[f64], offset: f64, levels: usize) -> Self {
        Motion {
            offset,
            coefficients: vec![coefficients.to_vec(); levels],
            rates: vec![vec![0.0; coefficients.len()]; levels],
        }
    }

    pub fn levels(&self) -> usize {
        self.coefficients.len()
    }
}

/// Initial data: shell displacement and velocity on shell modes, fluid
/// component on reference fluid modes. The initial velocity is
/// `F^s_δ(η₁) + Σ cᵢ 𝒥_δ(Zᵢ)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialData {
    pub displacement: Vec<f64>,
    pub shell_velocity: Vec<f64>,
    pub fluid: Vec<f64>,
}

impl InitialData {
    pub fn is_zero(&self) -> bool {
        self.displacement.iter().chain(&self.shell_velocity).chain(&self.fluid).all(|x| *x == 0.0)
    }
}

/// One row of the run ledger.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub slip: f64,
    pub work: f64,
    /// Work of the prescribed motion on the shell (nonzero only for the
    /// linearized Koiter model, whose stiffness depends on `δ`).
    pub motion_work: f64,
    pub balance_residual: f64,
    pub min_eig_mass: f64,
    pub sup_eta: f64,
    pub picard_iter: usize,
}

/// Contact stop data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactStopInfo {
    pub t_star: f64,
    pub reason: String,
}

/// Solution on the time levels.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub displacement: Vec<DVector<f64>>,
    pub velocity_coefficients: Vec<DVector<f64>>,
    pub ledger: Vec<LedgerRow>,
    /// `u` at the volume nodes per level.
    pub velocity: Vec<Vec<[f64; 3]>>,
    /// Deformed volume weights per level.
    pub volume_weights: Vec<Vec<f64>>,
    pub energies: Vec<EnergyReport>,
    pub contact: Option<ContactStopInfo>,
    pub max_condition: f64,
    /// `(fluid-and-shell velocity, displacement)` L² projection residuals.
    pub projection_residual: (f64, f64),
}

impl Trajectory {
    /// `(max, L¹ in time)` of the per-step balance residuals.
    pub fn balance_summary(&self) -> (f64, f64) {
        let mut max = 0.0_f64;
        let mut l1 = 0.0;
        for w in self.ledger.windows(2) {
            let r = w[1].balance_residual;
            max = max.max(r);
            l1 += r * (w[1].t - w[0].t);
        }
        (max, l1)
    }

    pub fn max_energy(&self) -> f64 {
        self.ledger.iter().fold(0.0_f64, |m, r| m.max(r.energy))
    }
}

/// Discretization and assembly context.
#[derive(Clone, Debug)]
pub struct Galerkin {
    pub geometry: ReferenceGeometry,
    pub physics: Physics,
    pub model: ModelOptions,
    pub n: usize,
    /// Role of each basis index.
    pub roles: Vec<Role>,
    shell_slots: Vec<usize>,
    pub shell: ShellBasis,
    pub fluid: Arc<FluidReferenceBasis>,
    pub grid: VolumeGrid,
    pub surface: SurfaceGrid,
    pub disk: DiskGrid,
    shell_fields: Vec<ShellField>,
    shell_jets: Vec<Vec<ShellJet>>,
    fluid_volume: Vec<VectorTable>,
    fluid_wall: Vec<Vec<[f64; 3]>>,
    fluid_flux: Vec<(f64, f64)>,
    bending: DMatrix<f64>,
}

fn sym_all(t: &VectorTable) -> Vec<Grad3> {
    t.grads.iter().map(sym_grad).collect()
}

impl Galerkin {
    /// `n` must be even; uses the first `n/2` modes of both bases.
    pub fn new(
        geometry: ReferenceGeometry,
        physics: Physics,
        model: ModelOptions,
        shell: ShellBasis,
        fluid: Arc<FluidReferenceBasis>,
        n_theta_quad: usize,
        n: usize,
    ) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!("basis size n = {n} must be even and positive")));
        }
        let half = n / 2;
        if half > shell.len() || half > fluid.len() {
            return Err(Error::InvalidArgument(format!(
                "n = {n} needs {half} shell and fluid modes (have {} and {})",
                shell.len(),
                fluid.len()
            )));
        }
        let bad = physics.violations();
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        geometry.check_cutoff()?;
        let sg = fluid.grid;
        let grid = VolumeGrid::midpoint(sg.radius, sg.length, sg.nr, n_theta_quad, sg.nz);
        let surface = grid.surface();
        let disk = fluid.disk_grid(n_theta_quad);
        let shell_fields: Vec<ShellField> = (0..half).map(|i| shell.field(i)).collect();
        let shell_jets: Vec<Vec<ShellJet>> = shell_fields.iter().map(|f| f.eval_grid(&surface)).collect();
        let fluid_volume: Vec<VectorTable> = (0..half).map(|i| fluid.eval_volume(i, &grid)).collect();
        let fluid_wall: Vec<Vec<[f64; 3]>> = (0..half).map(|i| fluid.eval_wall(i, &surface)).collect();
        let sign = model.inflow_normal_sign;
        let fluid_flux = (0..half)
            .map(|i| disk_fluxes(&disk, &fluid.eval_disk(i, &disk, false), &fluid.eval_disk(i, &disk, true), sign))
            .collect();
        let bending = DMatrix::from_fn(half, half, |a, b| bending_form(&shell_jets[a], &shell_jets[b], &surface));
        Ok(Galerkin {
            geometry,
            physics,
            model,
            n,
            roles: (0..n).map(role).collect(),
            shell_slots: (0..half).map(|i| 2 * i).collect(),
            shell,
            fluid,
            grid,
            surface,
            disk,
            shell_fields,
            shell_jets,
            fluid_volume,
            fluid_wall,
            fluid_flux,
            bending,
        })
    }

    /// Drops the fluid modes, keeping the slip extensions of the shell modes.
    pub fn shell_only(mut self) -> Self {
        let half = self.shell_fields.len();
        self.roles = (0..half).map(Role::Shell).collect();
        self.shell_slots = (0..half).collect();
        self.n = half;
        self
    }

    pub fn shell_count(&self) -> usize {
        self.shell_slots.len()
    }

    /// Basis index of shell mode `i`.
    pub fn shell_slot(&self, i: usize) -> usize {
        self.shell_slots[i]
    }

    /// Test pairs of the basis itself.
    pub fn basis_pairs(&self) -> Vec<TestPair> {
        self.roles
            .iter()
            .map(|r| match *r {
                Role::Shell(i) => TestPair::Slip(self.shell_fields[i].clone()),
                Role::Fluid(i) => TestPair::Fluid(i),
            })
            .collect()
    }

    /// `Σ cᵢ Yᵢ` over the Galerkin shell modes.
    pub fn shell_field(&self, coefficients: &[f64]) -> ShellField {
        let mut f = ShellField::zero(self.geometry.length);
        for (c, y) in coefficients.iter().zip(&self.shell_fields) {
            if *c != 0.0 {
                f.add_scaled(y, *c);
            }
        }
        f
    }

    /// Shell coefficients (even entries) of a basis vector.
    pub fn shell_part(&self, a: &DVector<f64>) -> Vec<f64> {
        self.shell_slots.iter().map(|&p| a[p]).collect()
    }

    /// Jets of `η = Σ aᵢXᵢ` on the surface grid.
    pub fn eta_jets(&self, a: &DVector<f64>) -> Vec<ShellJet> {
        self.shell_jets_of(&self.shell_part(a))
    }

    /// Jets of `Σ cᵢYᵢ` over the Galerkin shell modes on the surface grid.
    pub fn shell_jets_of(&self, coefficients: &[f64]) -> Vec<ShellJet> {
        let mut out = vec![ShellJet::default(); self.surface.len()];
        for (jets, &c) in self.shell_jets.iter().zip(coefficients) {
            if c != 0.0 {
                for (o, j) in out.iter_mut().zip(jets) {
                    o.add_scaled(j, c);
                }
            }
        }
        out
    }

    pub fn koiter(&self) -> Koiter {
        Koiter {
            tensor: ElasticityTensor::Isotropic {
                lambda: self.physics.lame_lambda,
                mu: self.physics.lame_mu,
            },
            thickness: self.physics.shell_thickness,
            radius: self.geometry.radius,
            convention: self.model.metric_convention,
        }
    }

    fn motion_fields(&self, motion: &Motion, j: usize) -> (ShellField, ShellField) {
        let mut delta = self.shell_field(&motion.coefficients[j]);
        if motion.offset != 0.0 {
            delta = delta.add(&ShellField::constant(self.geometry.length, motion.offset));
        }
        (delta, self.shell_field(&motion.rates[j]))
    }

    /// Geometry and basis tables at time `t` for motion `δ`, `∂ₜδ`.
    pub fn level(&self, t: f64, delta: &ShellField, rate: &ShellField, velocity: Option<&[[f64; 3]]>) -> Result<Level> {
        let delta_jets = delta.eval_grid(&self.surface);
        let rate_jets = rate.eval_grid(&self.surface);
        let map = domain_map(&self.geometry, &self.grid, &delta_jets, Some(&rate_jets))?;
        let quad = DeformedQuadrature::new(&map, &delta_jets, Some(&rate_jets))?;
        let mut lvl = Level {
            t,
            delta: delta.clone(),
            rate: rate.clone(),
            delta_jets,
            map,
            quad,
            basis: FieldTables::default(),
            velocity: velocity.map(|v| v.to_vec()),
        };
        let pairs = self.basis_pairs();
        lvl.basis = self.tables(&lvl, &pairs)?;
        Ok(lvl)
    }

    /// Nodal tables of coupled test pairs at a level.
    pub fn tables(&self, level: &Level, pairs: &[TestPair]) -> Result<FieldTables> {
        let mut out = FieldTables::default();
        let needs_slip = pairs.iter().any(|p| matches!(p, TestPair::Slip(_)));
        let ext = if needs_slip {
            Some(SlipExtension::new(&self.geometry, &level.delta, Some(&level.rate))?)
        } else {
            None
        };
        let sign = self.model.inflow_normal_sign;
        let wall_nodes: Vec<MapNode> = (0..self.surface.len())
            .map(|i| {
                let (t, z) = self.surface.point(i);
                MapNode::at(&self.geometry, self.geometry.radius, t, z, &level.delta_jets[i], None)
            })
            .collect();
        for pair in pairs {
            match pair {
                TestPair::Slip(xi) => {
                    let ext = ext.as_ref().expect("slip extension prepared");
                    let field = ext.volume(&level.map, xi);
                    out.volume.push(field.table);
                    out.rates.push(field.rates);
                    out.wall.push(ext.wall(&self.surface, xi));
                    out.shell.push(Some(xi.eval_grid(&self.surface)));
                    let inlet = ext.disk_reference(&self.disk, xi, false);
                    let outlet = ext.disk_reference(&self.disk, xi, true);
                    out.fluxes.push(disk_fluxes(&self.disk, &inlet, &outlet, sign));
                }
                TestPair::Fluid(i) => {
                    let reference = if *i < self.fluid_volume.len() {
                        self.fluid_volume[*i].clone()
                    } else {
                        self.fluid.eval_volume(*i, &self.grid)
                    };
                    let n = reference.len();
                    let mut table = VectorTable::zeros(n, true);
                    let mut rates = vec![[0.0; 3]; n];
                    for (k, node) in level.map.nodes.iter().enumerate() {
                        let (w, g) = forward_jet(node, &reference.values[k], &reference.grads[k]);
                        table.values[k] = w;
                        table.grads[k] = g;
                        rates[k] = eulerian_rate(node, &reference.values[k], &[0.0; 3], &g);
                    }
                    let wall_ref = if *i < self.fluid_wall.len() {
                        self.fluid_wall[*i].clone()
                    } else {
                        self.fluid.eval_wall(*i, &self.surface)
                    };
                    let wall = wall_nodes
                        .iter()
                        .zip(&wall_ref)
                        .map(|(node, v)| matvec(&piola_matrix(node), v))
                        .collect();
                    out.volume.push(table);
                    out.rates.push(rates);
                    out.wall.push(wall);
                    out.shell.push(None);
                    let flux = if *i < self.fluid_flux.len() {
                        self.fluid_flux[*i]
                    } else {
                        let d = &self.disk;
                        disk_fluxes(d, &self.fluid.eval_disk(*i, d, false), &self.fluid.eval_disk(*i, d, true), sign)
                    };
                    out.fluxes.push(flux);
                }
            }
        }
        Ok(out)
    }

    /// Forms of `tests` (rows) against the level's basis (columns).
    pub fn block(&self, level: &Level, tests: &FieldTables) -> Result<Block> {
        let cols = &level.basis;
        let (nt, nc) = (tests.len(), cols.len());
        let ph = &self.physics;
        let w = &level.quad.volume;
        let flat = &level.quad.flat;
        let surf_w = &level.quad.surface;
        let nodes = &level.map.nodes;
        let nv = w.len();
        // domain velocity V = ∂ₜη̃ e_r and its divergence
        let speed: Vec<f64> = nodes.iter().map(|n| n.rate.value).collect();
        let div_v: Vec<f64> = nodes
            .iter()
            .map(|n| n.rate.d_r / n.stretch() + n.rate.value / n.radius())
            .collect();
        let sym_c: Vec<Vec<Grad3>> = cols.volume.iter().map(sym_all).collect();
        let sym_t: Vec<Vec<Grad3>> = tests.volume.iter().map(sym_all).collect();
        let adv_c: Option<Vec<Vec<[f64; 3]>>> = level.velocity.as_ref().map(|v| {
            cols.volume
                .iter()
                .map(|t| (0..nv).map(|k| directional(&t.grads[k], &v[k])).collect())
                .collect()
        });
        let adv_t: Option<Vec<Vec<[f64; 3]>>> = level.velocity.as_ref().map(|v| {
            tests
                .volume
                .iter()
                .map(|t| (0..nv).map(|k| directional(&t.grads[k], &v[k])).collect())
                .collect()
        });
        let slip_vec = |tabs: &FieldTables, p: usize| -> Vec<[f64; 3]> {
            tabs.wall[p]
                .iter()
                .enumerate()
                .map(|(i, tr)| {
                    let s = tabs.shell[p].as_ref().map_or(0.0, |j| j[i].value);
                    [tr[0] - s, tr[1], tr[2]]
                })
                .collect()
        };
        let slip_c: Vec<Vec<[f64; 3]>> = (0..nc).map(|p| slip_vec(cols, p)).collect();
        let slip_t: Vec<Vec<[f64; 3]>> = (0..nt).map(|p| slip_vec(tests, p)).collect();
        let alpha = ph.slip_length;
        let shell_mass = ph.shell_density * ph.shell_thickness;

        let mut blk = Block {
            mass: DMatrix::zeros(nt, nc),
            transport: DMatrix::zeros(nt, nc),
            viscous: DMatrix::zeros(nt, nc),
            convective: DMatrix::zeros(nt, nc),
            slip: DMatrix::zeros(nt, nc),
            stiffness: DMatrix::zeros(nt, nc),
            load: DVector::zeros(nt),
            flux_in: DVector::from_iterator(nt, tests.fluxes.iter().map(|f| f.0)),
            flux_out: DVector::from_iterator(nt, tests.fluxes.iter().map(|f| f.1)),
        };
        for k in 0..nt {
            let q = &tests.volume[k];
            let qr = &tests.rates[k];
            for i in 0..nc {
                let x = &cols.volume[i];
                let fluid_mass = pairwise_sum_by(0, nv, &|p| w[p] * dot3(&x.values[p], &q.values[p]));
                let sm = match (&cols.shell[i], &tests.shell[k]) {
                    (Some(a), Some(b)) => {
                        shell_mass * pairwise_sum_by(0, flat.len(), &|p| flat[p] * a[p].value * b[p].value)
                    }
                    _ => 0.0,
                };
                blk.mass[(k, i)] = ph.fluid_density * fluid_mass + sm;
                let tr = pairwise_sum_by(0, nv, &|p| {
                    let (xv, qv) = (&x.values[p], &q.values[p]);
                    let (xg, qg) = (&x.grads[p], &q.grads[p]);
                    let radial = (0..3).map(|c| xv[c] * qg[c][0] + qv[c] * xg[c][0]).sum::<f64>();
                    w[p] * (dot3(xv, &qr[p]) + 0.5 * (div_v[p] * dot3(xv, qv) + speed[p] * radial))
                });
                blk.transport[(k, i)] = ph.fluid_density * tr;
                let visc = pairwise_sum_by(0, nv, &|p| w[p] * crate::forms::double_dot(&sym_c[i][p], &sym_t[k][p]));
                blk.viscous[(k, i)] = 2.0 * ph.fluid_viscosity * visc;
                if let (Some(ac), Some(at)) = (&adv_c, &adv_t) {
                    let b = pairwise_sum_by(0, nv, &|p| {
                        w[p] * 0.5 * (dot3(&ac[i][p], &q.values[p]) - dot3(&at[k][p], &x.values[p]))
                    });
                    blk.convective[(k, i)] = ph.fluid_density * b;
                }
                let s = pairwise_sum_by(0, surf_w.len(), &|p| surf_w[p] * dot3(&slip_c[i][p], &slip_t[k][p]));
                blk.slip[(k, i)] = s / alpha;
            }
        }
        self.elastic_block(level, tests, &mut blk)?;
        Ok(blk)
    }

    fn elastic_block(&self, level: &Level, tests: &FieldTables, blk: &mut Block) -> Result<()> {
        let cols = &level.basis;
        let ti: Vec<usize> = (0..tests.len()).filter(|&k| tests.shell[k].is_some()).collect();
        let ci: Vec<usize> = (0..cols.len()).filter(|&i| cols.shell[i].is_some()).collect();
        match self.model.shell_model {
            ShellModel::Linear => {
                for &k in &ti {
                    let xi = tests.shell[k].as_ref().unwrap();
                    for &i in &ci {
                        let y = cols.shell[i].as_ref().unwrap();
                        blk.stiffness[(k, i)] = bending_form(y, xi, &self.surface);
                    }
                }
            }
            ShellModel::NonlinearKoiter => {
                let t: Vec<&[ShellJet]> = ti.iter().map(|&k| tests.shell[k].as_deref().unwrap()).collect();
                let c: Vec<&[ShellJet]> = ci.iter().map(|&i| cols.shell[i].as_deref().unwrap()).collect();
                let (s, g) = self.koiter().linearized_cross(&level.delta_jets, &t, &c, &self.surface)?;
                for (a, &k) in ti.iter().enumerate() {
                    blk.load[k] = g[a];
                    for (b, &i) in ci.iter().enumerate() {
                        blk.stiffness[(k, i)] = s[(a, b)];
                    }
                }
            }
        }
        Ok(())
    }

    /// Elastic energy `½∫|∇²η|²` or `½K_δ(η)`.
    pub fn elastic_energy(&self, level: &Level, a: &DVector<f64>) -> Result<f64> {
        match self.model.shell_model {
            ShellModel::Linear => {
                let s = DVector::from_vec(self.shell_part(a));
                Ok(0.5 * s.dot(&(&self.bending * &s)))
            }
            ShellModel::NonlinearKoiter => {
                let eta = self.eta_jets(a);
                Ok(0.5 * self.koiter().linearized_energy(&level.delta_jets, &eta, &self.surface)?)
            }
        }
    }

    /// Velocity values `Σ bᵢ Xᵢ` at the volume nodes.
    pub fn velocity_nodes(&self, level: &Level, b: &DVector<f64>) -> Vec<[f64; 3]> {
        let nv = level.quad.volume.len();
        let mut out = vec![[0.0; 3]; nv];
        for (i, tab) in level.basis.volume.iter().enumerate() {
            let c = b[i];
            if c == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(&tab.values) {
                for d in 0..3 {
                    o[d] += c * v[d];
                }
            }
        }
        out
    }

    /// `E, D, E_slip` of `(u, ∂ₜη) = Σ bᵢ(Xᵢ, Xᵢ)` and `η = Σ aᵢXᵢ`.
    pub fn energy_report(&self, level: &Level, blk: &Block, a: &DVector<f64>, b: &DVector<f64>) -> Result<EnergyReport> {
        let ph = &self.physics;
        let u = self.velocity_nodes(level, b);
        let w = &level.quad.volume;
        let fluid = 0.5 * ph.fluid_density * pairwise_sum_by(0, w.len(), &|p| w[p] * dot3(&u[p], &u[p]));
        let rate = self.eta_jets(b);
        let flat = &level.quad.flat;
        let shell = 0.5
            * ph.shell_density
            * ph.shell_thickness
            * pairwise_sum_by(0, flat.len(), &|p| flat[p] * rate[p].value * rate[p].value);
        Ok(EnergyReport {
            fluid_kinetic: fluid,
            shell_kinetic: shell,
            elastic: self.elastic_energy(level, a)?,
            dissipation: b.dot(&(&blk.viscous * b)),
            slip: b.dot(&(&blk.slip * b)),
        })
    }

    /// Initial coefficients and projection residuals.
    pub fn initial_state(
        &self,
        level: &Level,
        blk: &Block,
        init: &InitialData,
    ) -> Result<(DVector<f64>, DVector<f64>, (f64, f64))> {
        let n = self.n;
        let mut a = DVector::zeros(n);
        let (c, disp_res) = self.project_displacement(&init.displacement);
        for (i, ci) in c.iter().enumerate() {
            a[self.shell_slots[i]] = *ci;
        }
        let mut b = DVector::zeros(n);
        let mut vel_res = 0.0;
        if let Some((u0, eta1)) = self.initial_velocity(level, init)? {
            let rhs = self.initial_rhs(level, &level.basis, &u0, &eta1);
            let chol = blk.mass.clone().cholesky().ok_or(Error::SingularSystem { t: level.t })?;
            b = chol.solve(&rhs);
            let ph = &self.physics;
            let w = &level.quad.volume;
            let flat = &level.quad.flat;
            let norm_sq = ph.fluid_density * pairwise_sum_by(0, w.len(), &|p| w[p] * dot3(&u0[p], &u0[p]))
                + ph.shell_density
                    * ph.shell_thickness
                    * pairwise_sum_by(0, flat.len(), &|p| flat[p] * eta1[p] * eta1[p]);
            vel_res = (norm_sq - b.dot(&rhs)).max(0.0).sqrt();
        }
        Ok((a, b, (vel_res, disp_res)))
    }

    /// L² projection of `Σ dᵢ Yᵢ` (full shell basis) onto the Galerkin
    /// shell modes, with the projection residual.
    pub fn project_displacement(&self, displacement: &[f64]) -> (Vec<f64>, f64) {
        let half = self.shell_count();
        if displacement.iter().all(|x| *x == 0.0) {
            return (vec![0.0; half], 0.0);
        }
        let eta0 = self.shell.combine(displacement);
        let vals: Vec<f64> = eta0.eval_grid(&self.surface).iter().map(|j| j.value).collect();
        let c = self.shell.project(&vals, &self.surface, half);
        let diff = eta0.add(&self.shell_field(&c).scale(-1.0)).eval_grid(&self.surface);
        let wf = self.surface.weights();
        let res = pairwise_sum_by(0, wf.len(), &|p| wf[p] * diff[p].value * diff[p].value).sqrt();
        (c, res)
    }

    /// `ρ_f∫u₀·Q_k + ρ_s h∫η₁ξ_k` per test.
    fn initial_rhs(&self, level: &Level, tests: &FieldTables, u0: &[[f64; 3]], eta1: &[f64]) -> DVector<f64> {
        let ph = &self.physics;
        let w = &level.quad.volume;
        let flat = &level.quad.flat;
        DVector::from_fn(tests.len(), |k, _| {
            let f = pairwise_sum_by(0, w.len(), &|p| w[p] * dot3(&u0[p], &tests.volume[k].values[p]));
            let s = tests.shell[k].as_ref().map_or(0.0, |j| {
                pairwise_sum_by(0, flat.len(), &|p| flat[p] * eta1[p] * j[p].value)
            });
            ph.fluid_density * f + ph.shell_density * ph.shell_thickness * s
        })
    }

    fn contact_measure(&self, a: &DVector<f64>) -> (f64, f64, f64) {
        let jets = self.eta_jets(a);
        let sup = jets.iter().fold(0.0_f64, |m, j| m.max(j.value.abs()));
        let min_radius = jets.iter().fold(f64::INFINITY, |m, j| m.min(self.geometry.radius + j.value));
        let g = &self.geometry;
        // ≥ 0 means inadmissible
        let phi = (sup / g.bound - 1.0).max(g.margin / min_radius.max(1e-300) - 1.0);
        (sup, min_radius, phi)
    }

    /// Advances the system over the motion's time levels with step `dt`.
    pub fn solve(
        &self,
        motion: &Motion,
        velocity: Option<&[Vec<[f64; 3]>]>,
        forcing: &ForcingProfile,
        init: &InitialData,
        dt: f64,
    ) -> Result<Trajectory> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let levels = motion.levels();
        if levels == 0 {
            return Err(Error::InvalidArgument("motion has no time levels".into()));
        }
        if let Some(v) = velocity {
            if v.len() != levels {
                return Err(Error::InvalidArgument("velocity levels do not match the motion".into()));
            }
        }
        let level_at = |j: usize| -> Result<(Level, Block)> {
            let (d, r) = self.motion_fields(motion, j);
            let lvl = self.level(j as f64 * dt, &d, &r, velocity.map(|v| v[j].as_slice()))?;
            let blk = self.block(&lvl, &lvl.basis)?;
            Ok((lvl, blk))
        };
        let (mut lvl0, mut blk0) = level_at(0)?;
        let (mut a0, mut b0, proj) = self.initial_state(&lvl0, &blk0, init)?;
        let mut traj = Trajectory {
            projection_residual: proj,
            ..Default::default()
        };
        let rep0 = self.energy_report(&lvl0, &blk0, &a0, &b0)?;
        let (p_in, p_out) = forcing.at(0.0);
        let (sup0, _, phi0) = self.contact_measure(&a0);
        if phi0 >= 0.0 {
            return Err(Error::ContactStop {
                t_star: 0.0,
                reason: "initial displacement is not admissible".into(),
            });
        }
        traj.ledger.push(LedgerRow {
            t: 0.0,
            energy: rep0.total(),
            dissipation: rep0.dissipation,
            slip: rep0.slip,
            work: blk0.forcing(p_in, p_out).dot(&b0),
            min_eig_mass: min_eig(&blk0.mass),
            sup_eta: sup0,
            ..Default::default()
        });
        self.record(&mut traj, &lvl0, &a0, &b0, rep0);
        let mut e0 = rep0.total();
        let mut el0 = rep0.elastic;
        let mut phi_prev = phi0;
        for j in 0..levels - 1 {
            let (lvl1, blk1) = level_at(j + 1)?;
            let avg = Block::average(&blk0, &blk1);
            let t0 = j as f64 * dt;
            let t1 = t0 + dt;
            let f0 = blk0.forcing(forcing.inlet.eval(t0), forcing.outlet.eval(t0));
            let f1 = blk1.forcing(forcing.inlet.eval(t1), forcing.outlet.eval(t1));
            let fbar = (&f0 + &f1) * 0.5;
            let lhs = &blk1.mass * (2.0 / dt) - &avg.transport + avg.damping() + &avg.stiffness * (0.5 * dt);
            let rhs = &fbar - &avg.load - &avg.stiffness * &a0 + (&blk1.mass + &blk0.mass) * &b0 / dt;
            let sv = lhs.clone().singular_values();
            let cond = sv.max() / sv.min();
            if !(cond.is_finite()) || sv.min() <= f64::EPSILON * sv.max() {
                return Err(Error::SingularSystem { t: t1 });
            }
            traj.max_condition = traj.max_condition.max(cond);
            let bbar = lhs.lu().solve(&rhs).ok_or(Error::SingularSystem { t: t1 })?;
            let b1 = &bbar * 2.0 - &b0;
            let a1 = &a0 + &bbar * dt;
            let (sup1, _, phi1) = self.contact_measure(&a1);
            if phi1 >= 0.0 {
                let s = (-phi_prev / (phi1 - phi_prev)).clamp(0.0, 1.0);
                traj.contact = Some(ContactStopInfo {
                    t_star: t0 + s * dt,
                    reason: format!("displacement bound or margin reached between t = {t0} and t = {t1}"),
                });
                break;
            }
            let rep1 = self.energy_report(&lvl1, &blk1, &a1, &b1)?;
            let e1 = rep1.total();
            let diss = bbar.dot(&(&avg.viscous * &bbar));
            let slip = bbar.dot(&(&avg.slip * &bbar));
            let work = fbar.dot(&bbar);
            let motion_work = match self.model.shell_model {
                ShellModel::Linear => 0.0,
                ShellModel::NonlinearKoiter => {
                    let abar = (&a0 + &a1) * 0.5;
                    let power = (&avg.stiffness * &abar + &avg.load).dot(&(&a1 - &a0));
                    rep1.elastic - el0 - power
                }
            };
            let residual = ((e1 - e0) / dt + diss + slip - work - motion_work / dt).abs();
            traj.ledger.push(LedgerRow {
                t: t1,
                energy: e1,
                dissipation: diss,
                slip,
                work,
                motion_work,
                balance_residual: residual,
                min_eig_mass: min_eig(&blk1.mass),
                sup_eta: sup1,
                picard_iter: 0,
            });
            self.record(&mut traj, &lvl1, &a1, &b1, rep1);
            a0 = a1;
            b0 = b1;
            e0 = e1;
            el0 = rep1.elastic;
            phi_prev = phi1;
            lvl0 = lvl1;
            blk0 = blk1;
        }
        let _ = &lvl0;
        Ok(traj)
    }

    fn record(&self, traj: &mut Trajectory, level: &Level, a: &DVector<f64>, b: &DVector<f64>, rep: EnergyReport) {
        traj.times.push(level.t);
        traj.displacement.push(a.clone());
        traj.velocity_coefficients.push(b.clone());
        traj.velocity.push(self.velocity_nodes(level, b));
        traj.volume_weights.push(level.quad.volume.clone());
        traj.energies.push(rep);
    }

    /// Time-integrated weak-form residuals of `traj` against `pairs`, using
    /// the integrator's collocation rule. Returns `(residual, scale)` per
    /// pair, where `scale` sums the magnitudes of the individual terms.
    pub fn weak_residual(
        &self,
        traj: &Trajectory,
        motion: &Motion,
        velocity: Option<&[Vec<[f64; 3]>]>,
        forcing: &ForcingProfile,
        init: &InitialData,
        pairs: &[TestPair],
    ) -> Result<Vec<(f64, f64)>> {
        let levels = traj.times.len();
        let np = pairs.len();
        let mut res = DVector::zeros(np);
        let mut scale = DVector::zeros(np);
        let mut prev: Option<(Block, f64)> = None;
        for j in 0..levels {
            let (d, r) = self.motion_fields(motion, j);
            let lvl = self.level(traj.times[j], &d, &r, velocity.map(|v| v[j].as_slice()))?;
            let tests = self.tables(&lvl, pairs)?;
            let blk = self.block(&lvl, &tests)?;
            let t = traj.times[j];
            if j == 0 {
                let b_init = match self.initial_velocity(&lvl, init)? {
                    Some((u0, eta1)) => self.initial_rhs(&lvl, &tests, &u0, &eta1),
                    None => DVector::zeros(np),
                };
                res -= &b_init;
                scale += b_init.abs();
            }
            if j + 1 == levels {
                let m = &blk.mass * &traj.velocity_coefficients[j];
                res += &m;
                scale += m.abs();
            }
            if let Some((b0, t0)) = prev.take() {
                let avg = Block::average(&b0, &blk);
                let a0 = &traj.displacement[j - 1];
                let a1 = &traj.displacement[j];
                let bbar = (&traj.velocity_coefficients[j - 1] + &traj.velocity_coefficients[j]) * 0.5;
                let abar = (a0 + a1) * 0.5;
                let h = t - t0;
                let f = (b0.forcing(forcing.inlet.eval(t0), forcing.outlet.eval(t0))
                    + blk.forcing(forcing.inlet.eval(t), forcing.outlet.eval(t)))
                    * 0.5;
                let terms = [
                    -(&avg.transport * &bbar),
                    &avg.viscous * &bbar,
                    &avg.convective * &bbar,
                    &avg.slip * &bbar,
                    &avg.stiffness * &abar + &avg.load,
                    -f,
                ];
                for term in terms.iter() {
                    res += term * h;
                    scale += term.abs() * h;
                }
            }
            prev = Some((blk, t));
        }
        Ok((0..np).map(|k| (res[k].abs(), scale[k])).collect())
    }

    /// Nodal values of `u₀` and `η₁`, or `None` for zero initial velocity.
    fn initial_velocity(&self, level: &Level, init: &InitialData) -> Result<Option<(Vec<[f64; 3]>, Vec<f64>)>> {
        let mut pairs = Vec::new();
        let mut coef = Vec::new();
        if init.shell_velocity.iter().any(|x| *x != 0.0) {
            pairs.push(TestPair::Slip(self.shell.combine(&init.shell_velocity)));
            coef.push(1.0);
        }
        for (i, c) in init.fluid.iter().enumerate() {
            if *c != 0.0 {
                if i >= self.fluid.len() {
                    return Err(Error::InvalidArgument(format!("initial fluid mode {i} beyond the reference basis")));
                }
                pairs.push(TestPair::Fluid(i));
                coef.push(*c);
            }
        }
        if pairs.is_empty() {
            return Ok(None);
        }
        let tabs = self.tables(level, &pairs)?;
        let mut u0 = vec![[0.0; 3]; level.quad.volume.len()];
        let mut eta1 = vec![0.0; self.surface.len()];
        for (p, c) in coef.iter().enumerate() {
            for (o, v) in u0.iter_mut().zip(&tabs.volume[p].values) {
                for d in 0..3 {
                    o[d] += c * v[d];
                }
            }
            if let Some(s) = &tabs.shell[p] {
                for (o, j) in eta1.iter_mut().zip(s) {
                    *o += c * j.value;
                }
            }
        }
        Ok(Some((u0, eta1)))
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::PressureProfile;
    use crate::spaces::StokesGrid;

    fn setup(model: ShellModel, n: usize) -> Galerkin {
        let geom = ReferenceGeometry::default();
        let grid = StokesGrid {
            radius: geom.radius,
            length: geom.length,
            nr: 6,
            nz: 8,
        };
        let fluid = FluidReferenceBasis::shared(grid, 4).unwrap();
        let shell = ShellBasis::build(geom.length, 1, 2);
        let opts = ModelOptions {
            shell_model: model,
            ..Default::default()
        };
        Galerkin::new(geom, Physics::default(), opts, shell, fluid, 8, n).unwrap()
    }

    fn moving(g: &Galerkin, levels: usize, dt: f64) -> Motion {
        let half = g.shell_count();
        let coeff = |t: f64| -> Vec<f64> {
            (0..half).map(|i| 0.04 * (1.0 + i as f64) * (2.0 * t + 0.3 * i as f64).sin()).collect()
        };
        let rate = |t: f64| -> Vec<f64> {
            (0..half).map(|i| 0.08 * (1.0 + i as f64) * (2.0 * t + 0.3 * i as f64).cos()).collect()
        };
        Motion {
            offset: 0.01,
            coefficients: (0..levels).map(|j| coeff(j as f64 * dt)).collect(),
            rates: (0..levels).map(|j| rate(j as f64 * dt)).collect(),
        }
    }

    fn excited(g: &Galerkin) -> InitialData {
        InitialData {
            displacement: vec![0.05, 0.0, 0.03],
            shell_velocity: vec![0.1, 0.05],
            fluid: vec![0.2, 0.0, -0.1],
        }
        .trimmed(g)
    }

    impl InitialData {
        fn trimmed(mut self, g: &Galerkin) -> Self {
            self.fluid.truncate(g.fluid.len());
            self
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = setup(ShellModel::Linear, 4);
        let motion = Motion::frozen(&[0.0; 2], 0.0, 4);
        let traj = g
            .solve(&motion, None, &ForcingProfile::zero(), &InitialData::default(), 0.05)
            .unwrap();
        for (a, b) in traj.displacement.iter().zip(&traj.velocity_coefficients) {
            assert_eq!(a.amax(), 0.0);
            assert_eq!(b.amax(), 0.0);
        }
        assert!(traj.ledger.iter().all(|r| r.energy == 0.0));
    }

    #[test]
    fn mass_is_positive_definite_on_moving_domains() {
        let g = setup(ShellModel::Linear, 6);
        let motion = moving(&g, 5, 0.4);
        for j in 0..motion.levels() {
            let (d, r) = g.motion_fields(&motion, j);
            let lvl = g.level(0.0, &d, &r, None).unwrap();
            let blk = g.block(&lvl, &lvl.basis).unwrap();
            let asym = (&blk.mass - blk.mass.transpose()).amax();
            assert!(asym < 1e-13 * blk.mass.amax());
            assert!(min_eig(&blk.mass) > 1e-3, "min eig {}", min_eig(&blk.mass));
        }
    }

    #[test]
    fn basis_traces_couple_kinematically_at_rest() {
        let g = setup(ShellModel::Linear, 6);
        let zero = ShellField::zero(g.geometry.length);
        let lvl = g.level(0.0, &zero, &zero, None).unwrap();
        for p in 0..g.n {
            let wall = &lvl.basis.wall[p];
            match g.roles[p] {
                Role::Shell(i) => {
                    for (tr, y) in wall.iter().zip(&g.shell_jets[i]) {
                        assert!((tr[0] - y.value).abs() < 1e-12);
                    }
                }
                Role::Fluid(_) => {
                    assert!(wall.iter().all(|tr| tr[0].abs() < 1e-12));
                }
            }
        }
    }

    #[test]
    fn basis_is_divergence_free_on_deformed_domain() {
        let g = setup(ShellModel::Linear, 6);
        let motion = moving(&g, 2, 0.5);
        let (d, r) = g.motion_fields(&motion, 1);
        let lvl = g.level(0.5, &d, &r, None).unwrap();
        for tab in &lvl.basis.volume {
            let div = tab.divergence();
            let scale = tab.grads.iter().map(crate::piola::frob).fold(0.0, f64::max);
            let worst = div.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert!(worst <= 1e-6 * scale.max(1.0), "div {worst}");
        }
    }

    #[test]
    fn mass_rate_matches_transport() {
        let g = setup(ShellModel::Linear, 6);
        let half = g.shell_count();
        let c0: Vec<f64> = (0..half).map(|i| 0.03 * (i as f64 + 1.0)).collect();
        let c1: Vec<f64> = (0..half).map(|i| 0.05 - 0.02 * i as f64).collect();
        let at = |t: f64| {
            let c: Vec<f64> = c0.iter().zip(&c1).map(|(a, b)| a + t * b).collect();
            let d = g.shell_field(&c);
            let r = g.shell_field(&c1);
            let lvl = g.level(t, &d, &r, None).unwrap();
            let blk = g.block(&lvl, &lvl.basis).unwrap();
            blk
        };
        let h = 1e-4;
        let plus = at(h);
        let minus = at(-h);
        let mid = at(0.0);
        let fd = (&plus.mass - &minus.mass) / (2.0 * h);
        let exact = &mid.transport + mid.transport.transpose();
        let err = (&fd - &exact).amax();
        assert!(err < 1e-6 * exact.amax().max(1.0), "err {err} vs {}", exact.amax());
    }

    #[test]
    fn volume_transport_matches_surface_transport() {
        // ½∫div(V f) over the domain equals the boundary flux ½∫_Γ f V·ν.
        let g = setup(ShellModel::Linear, 4);
        let half = g.shell_count();
        let c: Vec<f64> = (0..half).map(|i| 0.02 * (i as f64 + 1.0)).collect();
        let rate: Vec<f64> = (0..half).map(|i| 0.1 - 0.03 * i as f64).collect();
        let lvl = g.level(0.0, &g.shell_field(&c), &g.shell_field(&rate), None).unwrap();
        let blk = g.block(&lvl, &lvl.basis).unwrap();
        let sym = &blk.transport + blk.transport.transpose();
        // subtract the ∂t parts to isolate the divergence terms
        let w = &lvl.quad.volume;
        let cols = &lvl.basis;
        for k in 0..g.n {
            for i in 0..g.n {
                let rate_part = pairwise_sum_by(0, w.len(), &|p| {
                    w[p] * (dot3(&cols.volume[i].values[p], &cols.rates[k][p])
                        + dot3(&cols.volume[k].values[p], &cols.rates[i][p]))
                });
                let volume = sym[(k, i)] - rate_part;
                let surface = -2.0 * crate::forms::interface_transport_form(&cols.wall[i], &cols.wall[k], &lvl.quad);
                let scale = sym.amax().max(1e-3);
                assert!((volume - surface).abs() < 0.05 * scale, "{k},{i}: {volume} vs {surface}");
            }
        }
    }

    fn matrix_ode_oracle(mass: &DMatrix<f64>, damp: &DMatrix<f64>, stiff: &DMatrix<f64>, a0: &DVector<f64>, b0: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
        // RK4 on M b' = −C b − K a with a fine step.
        let minv = mass.clone().try_inverse().unwrap();
        let f = |a: &DVector<f64>, b: &DVector<f64>| (b.clone(), -(&minv * (damp * b + stiff * a)));
        let steps = 4000;
        let h = t / steps as f64;
        let (mut a, mut b) = (a0.clone(), b0.clone());
        for _ in 0..steps {
            let (k1a, k1b) = f(&a, &b);
            let (k2a, k2b) = f(&(&a + &k1a * (h / 2.0)), &(&b + &k1b * (h / 2.0)));
            let (k3a, k3b) = f(&(&a + &k2a * (h / 2.0)), &(&b + &k2b * (h / 2.0)));
            let (k4a, k4b) = f(&(&a + &k3a * h), &(&b + &k3b * h));
            a += (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * (h / 6.0);
            b += (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * (h / 6.0);
        }
        (a, b)
    }

    #[test]
    fn frozen_linear_system_matches_ode_oracle() {
        let g = setup(ShellModel::Linear, 4);
        let motion = Motion::frozen(&[0.0; 2], 0.0, 2);
        let (d, r) = g.motion_fields(&motion, 0);
        let lvl = g.level(0.0, &d, &r, None).unwrap();
        let blk = g.block(&lvl, &lvl.basis).unwrap();
        let init = excited(&g);
        let (a0, b0, _) = g.initial_state(&lvl, &blk, &init).unwrap();
        let t_end = 0.4;
        let (ea, eb) = matrix_ode_oracle(&blk.mass, &blk.damping(), &blk.stiffness, &a0, &b0, t_end);
        let mut errs = Vec::new();
        for steps in [10usize, 20] {
            let dt = t_end / steps as f64;
            let motion = Motion::frozen(&[0.0; 2], 0.0, steps + 1);
            let traj = g.solve(&motion, None, &ForcingProfile::zero(), &init, dt).unwrap();
            let a = traj.displacement.last().unwrap();
            let b = traj.velocity_coefficients.last().unwrap();
            errs.push((a - &ea).amax() + (b - &eb).amax());
            // frozen linear system: the balance is exact up to roundoff
            let (max, _) = traj.balance_summary();
            assert!(max < 1e-10, "balance {max}");
        }
        assert!(errs[1] < 1e-3, "errors {errs:?}");
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order} from {errs:?}");
    }

    /// `m a″ + c a′ + k a = 0` in closed form (underdamped or overdamped).
    fn damped_oscillator(m: f64, c: f64, k: f64, a0: f64, b0: f64, t: f64) -> (f64, f64) {
        let gamma = c / (2.0 * m);
        let disc = k / m - gamma * gamma;
        if disc > 0.0 {
            let w = disc.sqrt();
            let (s, co) = (w * t).sin_cos();
            let e = (-gamma * t).exp();
            let b_coef = (b0 + gamma * a0) / w;
            let a = e * (a0 * co + b_coef * s);
            let da = e * (-gamma * (a0 * co + b_coef * s) + (-a0 * w * s + b_coef * w * co));
            (a, da)
        } else {
            let w = (-disc).sqrt();
            let (r1, r2) = (-gamma + w, -gamma - w);
            let c2 = (b0 - r1 * a0) / (r2 - r1);
            let c1 = a0 - c2;
            (c1 * (r1 * t).exp() + c2 * (r2 * t).exp(), c1 * r1 * (r1 * t).exp() + c2 * r2 * (r2 * t).exp())
        }
    }

    #[test]
    fn one_shell_mode_is_a_scalar_oscillator() {
        let g = setup(ShellModel::Linear, 2).shell_only();
        assert_eq!(g.n, 1);
        let zero = ShellField::zero(g.geometry.length);
        let lvl = g.level(0.0, &zero, &zero, None).unwrap();
        let blk = g.block(&lvl, &lvl.basis).unwrap();
        let (m, c, k) = (blk.mass[(0, 0)], blk.damping()[(0, 0)], blk.stiffness[(0, 0)]);
        assert!((k - g.bending[(0, 0)]).abs() < 1e-14 * k);
        let init = InitialData {
            displacement: vec![0.05],
            shell_velocity: vec![0.02],
            fluid: vec![],
        };
        let (a0, b0, _) = g.initial_state(&lvl, &blk, &init).unwrap();
        let t_end = 0.5;
        let (ea, eb) = damped_oscillator(m, c, k, a0[0], b0[0], t_end);
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let steps = (t_end / dt).round() as usize;
            let motion = Motion::frozen(&[0.0], 0.0, steps + 1);
            let traj = g.solve(&motion, None, &ForcingProfile::zero(), &init, dt).unwrap();
            let a = traj.displacement.last().unwrap()[0];
            let b = traj.velocity_coefficients.last().unwrap()[0];
            errs.push((a - ea).abs() + (b - eb).abs());
            let (max, _) = traj.balance_summary();
            assert!(max < 1e-11, "balance {max}");
        }
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!(order > 1.9, "order {order} from {errs:?}");
        }
    }

    #[test]
    fn balance_residual_is_second_order_on_moving_domain() {
        for model in [ShellModel::Linear, ShellModel::NonlinearKoiter] {
            let g = setup(model, 4);
            let init = excited(&g);
            let forcing = ForcingProfile {
                inlet: PressureProfile::Pulse {
                    t0: 0.1,
                    width: 0.3,
                    amplitude: 1.0,
                },
                outlet: PressureProfile::Constant(0.0),
            };
            let t_end = 0.4;
            let mut maxima = Vec::new();
            for steps in [8usize, 16] {
                let dt = t_end / steps as f64;
                let motion = moving(&g, steps + 1, dt);
                let traj = g.solve(&motion, None, &forcing, &init, dt).unwrap();
                maxima.push(traj.balance_summary().0);
            }
            let ratio = maxima[0] / maxima[1];
            assert!(ratio > 3.0, "{model:?}: residuals {maxima:?}");
        }
    }

    #[test]
    fn in_basis_weak_residual_vanishes() {
        let g = setup(ShellModel::NonlinearKoiter, 4);
        let init = excited(&g);
        let forcing = ForcingProfile {
            inlet: PressureProfile::Constant(0.5),
            outlet: PressureProfile::Constant(0.0),
        };
        let dt = 0.05;
        let motion = moving(&g, 5, dt);
        let vel: Vec<Vec<[f64; 3]>> = (0..5)
            .map(|j| {
                let (d, r) = g.motion_fields(&motion, j);
                let lvl = g.level(0.0, &d, &r, None).unwrap();
                let mut b = DVector::zeros(g.n);
                b[1] = 0.3;
                b[0] = -0.1 * j as f64;
                g.velocity_nodes(&lvl, &b)
            })
            .collect();
        let traj = g.solve(&motion, Some(&vel), &forcing, &init, dt).unwrap();
        let pairs = g.basis_pairs();
        let res = g.weak_residual(&traj, &motion, Some(&vel), &forcing, &init, &pairs).unwrap();
        for (r, s) in res {
            assert!(r <= 1e-10 * s.max(1.0), "residual {r} scale {s}");
        }
    }
}
