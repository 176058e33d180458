//! Run configuration: a TOML document with one table per concern.
//!
//! Every key is optional; missing keys take the normalized preset
//! (`ρ_f = ρ_s = h = 1`, `μ_f = ½`, `α = 1`).
//!
//! ```toml
//! seed = 7
//!
//! [geometry]
//! radius = 1.0
//! length = 2.0
//!
//! [discretization]
//! basis_size = 8
//! dt = 0.002
//! t_end = 0.4
//!
//! [forcing]
//! inlet = "pulse(0.0,0.2,1.0)"
//! outlet = "zero"
//! ```

use crate::coupling::{Problem, SolverOptions};
use crate::error::{Error, Result};
use crate::forms::{ForcingProfile, PressureProfile};
use crate::galerkin::{Galerkin, InitialData, ModelOptions, Physics};
use crate::geometry::ReferenceGeometry;
use crate::spaces::{FluidReferenceBasis, ShellBasis, StokesGrid};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub radius: f64,
    pub length: f64,
    /// Defaults to `R/4`.
    pub cutoff_inner: Option<f64>,
    /// Defaults to `R/4`.
    pub cutoff_outer: Option<f64>,
    /// Sup-norm cap `M`; defaults to `R/4`.
    pub bound: Option<f64>,
    /// Minimum `R + η`; defaults to `R/20`.
    pub margin: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            radius: 1.0,
            length: 2.0,
            cutoff_inner: None,
            cutoff_outer: None,
            bound: None,
            margin: None,
        }
    }
}

impl GeometryConfig {
    pub fn resolve(&self) -> ReferenceGeometry {
        let mut g = ReferenceGeometry::with_defaults(self.radius, self.length);
        if let Some(a) = self.cutoff_inner {
            g.cutoff_inner = a;
        }
        if let Some(b) = self.cutoff_outer {
            g.cutoff_outer = b;
        }
        if let Some(m) = self.bound {
            g.bound = m;
        }
        if let Some(m) = self.margin {
            g.margin = m;
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Discretization {
    /// Interleaved basis size `n` (even).
    pub basis_size: usize,
    /// Fourier cutoff of the shell basis.
    pub shell_n_theta: usize,
    /// Axial profiles per Fourier mode.
    pub shell_n_z: usize,
    /// Reference fluid modes computed; at least `basis_size / 2` are used.
    pub fluid_modes: usize,
    pub grid_nr: usize,
    pub grid_nz: usize,
    /// Angular quadrature nodes.
    pub grid_n_theta: usize,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for Discretization {
    fn default() -> Self {
        Discretization {
            basis_size: 8,
            shell_n_theta: 3,
            shell_n_z: 3,
            fluid_modes: 16,
            grid_nr: 8,
            grid_nz: 16,
            grid_n_theta: 16,
            dt: 0.002,
            t_end: 0.4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingConfig {
    /// `zero`, `constant`, `constant(c)`, `pulse(t0,width,amplitude)` or a
    /// CSV path with `(t, P)` rows, relative to the config file.
    pub inlet: String,
    pub outlet: String,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            inlet: "pulse(0.0,0.2,1.0)".into(),
            outlet: "zero".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub physics: Physics,
    pub model: ModelOptions,
    pub discretization: Discretization,
    pub forcing: ForcingConfig,
    pub initial: InitialData,
    pub solver: SolverOptions,
    /// Directory that relative CSV paths resolve against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.forcing()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// All violated invariants.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let g = &self.geometry;
        if !(g.radius > 0.0 && g.radius.is_finite()) {
            v.push(format!("geometry.radius must be positive (got {})", g.radius));
        }
        if !(g.length > 0.0 && g.length.is_finite()) {
            v.push(format!("geometry.length must be positive (got {})", g.length));
        }
        if v.is_empty() {
            v.extend(g.resolve().violations());
        }
        v.extend(self.physics.violations());
        if !(self.model.inflow_normal_sign == 1.0 || self.model.inflow_normal_sign == -1.0) {
            v.push(format!("model.inflow_normal_sign must be 1 or -1 (got {})", self.model.inflow_normal_sign));
        }
        let d = &self.discretization;
        if d.basis_size == 0 || d.basis_size % 2 != 0 {
            v.push(format!("discretization.basis_size must be even and positive (got {})", d.basis_size));
        }
        for (name, x) in [
            ("discretization.shell_n_theta", d.shell_n_theta),
            ("discretization.shell_n_z", d.shell_n_z),
            ("discretization.grid_nr", d.grid_nr),
            ("discretization.grid_nz", d.grid_nz),
            ("discretization.grid_n_theta", d.grid_n_theta),
        ] {
            if x == 0 {
                v.push(format!("{name} must be positive"));
            }
        }
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            v.push(format!("discretization.dt must be positive (got {})", d.dt));
        }
        if !(d.t_end > 0.0 && d.t_end.is_finite()) {
            v.push(format!("discretization.t_end must be positive (got {})", d.t_end));
        }
        let shell_len = 1 + 2 * d.shell_n_theta;
        if d.shell_n_theta > 0 && d.shell_n_z > 0 && d.basis_size / 2 > shell_len * d.shell_n_z {
            v.push(format!(
                "discretization.basis_size = {} needs more shell modes than shell_n_theta/shell_n_z provide ({})",
                d.basis_size,
                shell_len * d.shell_n_z
            ));
        }
        if self.initial.displacement.len() > shell_len * d.shell_n_z
            || self.initial.shell_velocity.len() > shell_len * d.shell_n_z
        {
            v.push("initial shell coefficients exceed the shell basis".into());
        }
        if self.initial.fluid.len() > d.fluid_modes.max(d.basis_size / 2) {
            v.push("initial.fluid has more entries than reference fluid modes".into());
        }
        v.extend(self.solver.violations());
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn forcing(&self) -> Result<ForcingProfile> {
        let base = self.base_dir.as_deref();
        Ok(ForcingProfile {
            inlet: PressureProfile::parse(&self.forcing.inlet, base)?,
            outlet: PressureProfile::parse(&self.forcing.outlet, base)?,
        })
    }

    pub fn stokes_grid(&self) -> StokesGrid {
        let d = &self.discretization;
        StokesGrid {
            radius: self.geometry.radius,
            length: self.geometry.length,
            nr: d.grid_nr,
            nz: d.grid_nz,
        }
    }

    /// Galerkin context with basis size `n` (the configured one if `None`).
    pub fn galerkin(&self, n: Option<usize>) -> Result<Galerkin> {
        self.validate()?;
        let d = &self.discretization;
        let n = n.unwrap_or(d.basis_size);
        let fluid = FluidReferenceBasis::shared(self.stokes_grid(), d.fluid_modes.max(n / 2))?;
        let shell = ShellBasis::build(self.geometry.length, d.shell_n_theta, d.shell_n_z);
        Galerkin::new(self.geometry.resolve(), self.physics, self.model, shell, fluid, d.grid_n_theta, n)
    }

    pub fn problem(&self, n: Option<usize>) -> Result<Problem> {
        let d = &self.discretization;
        Problem::new(self.galerkin(n)?, self.forcing()?, self.initial.clone(), d.dt, d.t_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_the_normalized_preset() {
        let cfg = SimConfig::from_toml("").unwrap();
        assert_eq!(cfg.physics.fluid_density, 1.0);
        assert_eq!(cfg.physics.shell_density, 1.0);
        assert_eq!(cfg.physics.shell_thickness, 1.0);
        assert_eq!(cfg.physics.fluid_viscosity, 0.5);
        assert_eq!(cfg, SimConfig::default());
    }

    #[test]
    fn zero_slip_length_is_rejected() {
        let err = SimConfig::from_toml("[physics]\nslip_length = 0.0\n").unwrap_err();
        match err {
            Error::Validation(v) => assert!(v.iter().any(|m| m.contains("slip_length"))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_dt_is_rejected() {
        let err = SimConfig::from_toml("[discretization]\ndt = -1.0\n").unwrap_err();
        assert!(matches!(err, Error::Validation(ref v) if v.iter().any(|m| m.contains("dt"))));
    }

    #[test]
    fn unknown_keys_report_the_key() {
        let err = SimConfig::from_toml("[physics]\ndensity = 2.0\n").unwrap_err();
        match err {
            Error::Parse(m) => assert!(m.contains("density") && m.contains("line"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = "seed = 3\n[geometry]\nradius = 1.5\nbound = 0.3\n[model]\nshell_model = \"nonlinear-koiter\"\n\
                    [forcing]\ninlet = \"pulse(0.1,0.3,2.0)\"\n[initial]\ndisplacement = [0.01, 0.0, 0.02]\n";
        let cfg = SimConfig::from_toml(text).unwrap();
        let again = SimConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.geometry.resolve().bound, 0.3);
        assert!((cfg.geometry.resolve().margin - 1.5 / 20.0).abs() < 1e-15);
    }
}
