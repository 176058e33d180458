//! Run-directory writers. Every float goes through [`fmt17`], so two runs with
//! the same configuration produce identical bytes.

use crate::config::SimConfig;
use crate::coupling::{CauchyTable, PicardOutcome, PicardRow};
use crate::error::Result;
use crate::galerkin::{Galerkin, Trajectory};
use crate::numerics::fmt17;
use crate::spaces::{ShellBasis, SurfaceGrid};
use serde::Serialize;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

/// `serde_json` formatter: pretty layout, floats with 17 significant digits.
#[derive(Default)]
pub struct Fixed17 {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl serde_json::ser::Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt17(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Pretty JSON with 17-digit floats; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17::default());
    value.serialize(&mut ser).expect("report serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json is utf-8")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_error)
}

fn csv_error(e: csv::Error) -> crate::Error {
    crate::Error::Io(io::Error::other(e.to_string()))
}

fn row(w: &mut csv::Writer<fs::File>, fields: &[String]) -> Result<()> {
    w.write_record(fields).map_err(csv_error)
}

/// Output directory of one run.
pub struct RunDirectory {
    pub root: PathBuf,
}

impl RunDirectory {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(RunDirectory { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_config(&self, cfg: &SimConfig) -> Result<()> {
        fs::write(self.path("config.toml"), cfg.to_toml())?;
        Ok(())
    }

    pub fn write_ledger(&self, traj: &Trajectory) -> Result<()> {
        let mut w = csv_writer(&self.path("ledger.csv"))?;
        row(
            &mut w,
            &[
                "t", "energy", "dissipation", "slip", "work", "motion_work", "balance_residual", "min_eig_mass",
                "sup_eta", "picard_iter",
            ]
            .map(String::from),
        )?;
        for r in &traj.ledger {
            row(
                &mut w,
                &[
                    fmt17(r.t),
                    fmt17(r.energy),
                    fmt17(r.dissipation),
                    fmt17(r.slip),
                    fmt17(r.work),
                    fmt17(r.motion_work),
                    fmt17(r.balance_residual),
                    fmt17(r.min_eig_mass),
                    fmt17(r.sup_eta),
                    r.picard_iter.to_string(),
                ],
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_picard(&self, log: &[PicardRow]) -> Result<()> {
        let mut w = csv_writer(&self.path("picard.csv"))?;
        row(
            &mut w,
            &[
                "iteration", "delta_update", "velocity_update", "update", "max_energy", "energy_constant", "min_radius",
                "balance_max", "mollifier_width",
            ]
            .map(String::from),
        )?;
        for r in log {
            row(
                &mut w,
                &[
                    r.iteration.to_string(),
                    fmt17(r.delta_update),
                    fmt17(r.velocity_update),
                    fmt17(r.update),
                    fmt17(r.max_energy),
                    fmt17(r.energy_constant),
                    fmt17(r.min_radius),
                    fmt17(r.balance_max),
                    fmt17(r.width),
                ],
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// `eta_snapshots/step_XXXXX.csv` every `every` steps plus the last one.
    pub fn write_snapshots(&self, g: &Galerkin, traj: &Trajectory, every: usize) -> Result<usize> {
        let dir = self.path("eta_snapshots");
        fs::create_dir_all(&dir)?;
        let every = every.max(1);
        let last = traj.times.len().saturating_sub(1);
        let mut count = 0;
        for (j, (t, a)) in traj.times.iter().zip(&traj.displacement).enumerate() {
            if j % every != 0 && j != last {
                continue;
            }
            let mut w = csv_writer(&dir.join(format!("step_{j:05}.csv")))?;
            row(&mut w, &["t", "theta", "z", "eta"].map(String::from))?;
            for (p, jet) in g.eta_jets(a).iter().enumerate() {
                let (theta, z) = g.surface.point(p);
                row(&mut w, &[fmt17(*t), fmt17(theta), fmt17(z), fmt17(jet.value)])?;
            }
            w.flush()?;
            count += 1;
        }
        Ok(count)
    }

    pub fn write_cauchy(&self, table: &CauchyTable) -> Result<()> {
        let mut w = csv_writer(&self.path("cauchy.csv"))?;
        row(&mut w, &["from", "to", "velocity", "shell_rate", "hessian"].map(String::from))?;
        let (v, r, h) = (
            CauchyTable::consecutive(&table.velocity),
            CauchyTable::consecutive(&table.shell_rate),
            CauchyTable::consecutive(&table.hessian),
        );
        for i in 0..v.len() {
            row(
                &mut w,
                &[table.labels[i].clone(), table.labels[i + 1].clone(), fmt17(v[i]), fmt17(r[i]), fmt17(h[i])],
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_report<T: Serialize>(&self, report: &T) -> Result<()> {
        fs::write(self.path("report.json"), to_json(report))?;
        Ok(())
    }
}

/// Summary of one coupled or decoupled run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    /// `completed`, `contact_stop` or `not_converged`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contact_reason: Option<String>,
    pub basis_size: usize,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_update: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_consistency: Option<f64>,
    pub mollifier_width: f64,
    pub energy_constant: f64,
    pub max_energy: f64,
    pub balance_residual_max: f64,
    pub balance_residual_l1: f64,
    pub relative_balance_residual_max: f64,
    pub min_radius: f64,
    pub sup_eta: f64,
    pub max_condition: f64,
}

impl RunReport {
    pub fn new(command: &str, g: &Galerkin, traj: &Trajectory, dt: f64, t_end: f64, epsilon: f64, width: f64, c: f64) -> Self {
        let (bmax, bl1) = traj.balance_summary();
        let emax = traj.max_energy();
        let min_radius = traj
            .displacement
            .iter()
            .flat_map(|a| g.eta_jets(a))
            .fold(f64::INFINITY, |m, j| m.min(g.geometry.radius + j.value));
        RunReport {
            command: command.into(),
            status: if traj.contact.is_some() { "contact_stop" } else { "completed" }.into(),
            t_star: traj.contact.as_ref().map(|c| c.t_star),
            contact_reason: traj.contact.as_ref().map(|c| c.reason.clone()),
            basis_size: g.n,
            dt,
            t_end,
            steps: traj.times.len().saturating_sub(1),
            epsilon,
            iterations: None,
            final_update: None,
            self_consistency: None,
            mollifier_width: width,
            energy_constant: c,
            max_energy: emax,
            balance_residual_max: bmax,
            balance_residual_l1: bl1,
            relative_balance_residual_max: if emax > 0.0 { bmax / emax } else { 0.0 },
            min_radius,
            sup_eta: traj.ledger.iter().fold(0.0_f64, |m, r| m.max(r.sup_eta)),
            max_condition: traj.max_condition,
        }
    }

    pub fn picard(g: &Galerkin, out: &PicardOutcome, dt: f64, t_end: f64, epsilon: f64) -> Self {
        let run = &out.run;
        let mut rep = Self::new("simulate", g, &run.trajectory, dt, t_end, epsilon, run.width, run.energy_constant);
        if let Some(c) = &out.contact {
            rep.status = "contact_stop".into();
            rep.t_star = Some(c.t_star);
            rep.contact_reason = Some(c.reason.clone());
        } else if !out.converged {
            rep.status = "not_converged".into();
        }
        rep.iterations = Some(out.iterations);
        rep.final_update = out.log.last().map(|r| r.update);
        rep.self_consistency = out.self_consistency;
        rep
    }
}

/// Shell basis values on a surface grid, one row per `(mode, node)`.
pub fn dump_shell_basis(path: &Path, basis: &ShellBasis, grid: &SurfaceGrid, count: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    row(
        &mut w,
        &["mode", "k", "parity", "j", "theta", "z", "value", "d_theta", "d_z"].map(String::from),
    )?;
    for (i, mode) in basis.modes.iter().take(count).enumerate() {
        let parity = format!("{:?}", mode.parity).to_lowercase();
        for (p, jet) in basis.field(i).eval_grid(grid).iter().enumerate() {
            let (theta, z) = grid.point(p);
            row(
                &mut w,
                &[
                    i.to_string(),
                    mode.k.to_string(),
                    parity.clone(),
                    mode.j.to_string(),
                    fmt17(theta),
                    fmt17(z),
                    fmt17(jet.value),
                    fmt17(jet.d_theta),
                    fmt17(jet.d_z),
                ],
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reference fluid modes at the volume nodes, one row per `(mode, node)`.
pub fn dump_fluid_basis(path: &Path, g: &Galerkin, count: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    row(
        &mut w,
        &["mode", "k", "eigenvalue", "r", "theta", "z", "u_r", "u_theta", "u_z", "divergence"].map(String::from),
    )?;
    for i in 0..count.min(g.fluid.len()) {
        let mode = &g.fluid.modes[i];
        let table = g.fluid.eval_volume(i, &g.grid);
        let div = table.divergence();
        for (p, v) in table.values.iter().enumerate() {
            let (r, theta, z) = g.grid.point(p);
            row(
                &mut w,
                &[
                    i.to_string(),
                    mode.k.to_string(),
                    fmt17(mode.eigenvalue),
                    fmt17(r),
                    fmt17(theta),
                    fmt17(z),
                    fmt17(v[0]),
                    fmt17(v[1]),
                    fmt17(v[2]),
                    fmt17(div[p]),
                ],
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        x: f64,
        y: Vec<f64>,
        z: Option<f64>,
    }

    #[test]
    fn json_floats_carry_seventeen_digits() {
        let s = to_json(&Sample {
            x: 0.1,
            y: vec![1.0, f64::NAN],
            z: None,
        });
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"), "{s}");
        assert!(s.contains("null"));
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["x"].as_f64(), Some(0.1));
    }
}
