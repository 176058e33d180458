//! Regularized prescribed motions, the relaxed fixed-point loop that
//! recovers `δ = η` and `v = u`, contact stopping and Cauchy diagnostics.

use crate::error::{Error, Result};
use crate::forms::ForcingProfile;
use crate::galerkin::{ContactStopInfo, Galerkin, InitialData, Motion, Trajectory};
use crate::numerics::{dot3, gauss_legendre, pairwise_sum_by};
use crate::spaces::ShellJet;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Smooth, compactly supported, nonnegative bump on `(-1, 1)` with unit mass.
#[derive(Clone, Debug)]
pub struct Kernel {
    norm: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Self::new()
    }
}

impl Kernel {
    pub fn new() -> Self {
        let (x, w) = gauss_legendre(64);
        let mass: f64 = x.iter().zip(&w).map(|(x, w)| w * Self::raw(*x)).sum();
        Kernel { norm: 1.0 / mass }
    }

    fn raw(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp()
        }
    }

    fn raw_deriv(x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            let q = 1.0 - x * x;
            -2.0 * x / (q * q) * (-1.0 / q).exp()
        }
    }

    /// `k(x)` and `k′(x)`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        (self.norm * Self::raw(x), self.norm * Self::raw_deriv(x))
    }
}

/// Nodal sample types that can be combined linearly.
pub trait Sample: Copy {
    const ZERO: Self;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Sample for f64 {
    const ZERO: Self = 0.0;
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Sample for [f64; 3] {
    const ZERO: Self = [0.0; 3];
    fn axpy(&mut self, a: f64, x: &Self) {
        for d in 0..3 {
            self[d] += a * x[d];
        }
    }
}

/// Convolution weights on a uniform time grid. Samples are interpolated
/// linearly and extended by their end values outside `[0, T]`.
#[derive(Clone, Debug)]
pub struct TimeConvolution {
    pub width: f64,
    /// `value[j][l]`: weight of sample `l` in `(δ∗k_h)(t_j)`.
    pub value: DMatrix<f64>,
    /// Weights of `∂ₜ(δ∗k_h)(t_j)`.
    pub rate: DMatrix<f64>,
}

impl TimeConvolution {
    pub fn new(kernel: &Kernel, levels: usize, dt: f64, width: f64) -> Self {
        let mut value = DMatrix::zeros(levels, levels);
        let mut rate = DMatrix::zeros(levels, levels);
        if levels == 1 || width <= 0.0 {
            value.fill_with_identity();
            return TimeConvolution { width, value, rate };
        }
        let t_end = (levels - 1) as f64 * dt;
        // panels aligned with the sample spacing resolve the interpolant kinks
        let panels = (2.0 * width / dt).ceil().max(1.0) as usize * 4;
        let (gx, gw) = gauss_legendre(8);
        let ph = 2.0 * width / panels as f64;
        for j in 0..levels {
            let tj = j as f64 * dt;
            for p in 0..panels {
                let lo = -width + p as f64 * ph;
                for (x, w) in gx.iter().zip(&gw) {
                    let s = lo + 0.5 * ph * (x + 1.0);
                    let (k, dk) = kernel.eval(s / width);
                    let qw = 0.5 * ph * w;
                    let tau = (tj - s).clamp(0.0, t_end);
                    let pos = tau / dt;
                    let l = (pos.floor() as usize).min(levels - 2);
                    let frac = pos - l as f64;
                    let kv = qw * k / width;
                    let kd = qw * dk / (width * width);
                    value[(j, l)] += kv * (1.0 - frac);
                    value[(j, l + 1)] += kv * frac;
                    rate[(j, l)] += kd * (1.0 - frac);
                    rate[(j, l + 1)] += kd * frac;
                }
            }
        }
        TimeConvolution { width, value, rate }
    }

    /// Applies the weights to per-level vectors.
    pub fn apply<T: Sample>(weights: &DMatrix<f64>, samples: &[Vec<T>]) -> Vec<Vec<T>> {
        let levels = samples.len();
        (0..levels)
            .map(|j| {
                let mut out = vec![T::ZERO; samples[0].len()];
                for (l, s) in samples.iter().enumerate() {
                    let w = weights[(j, l)];
                    if w != 0.0 {
                        for (o, v) in out.iter_mut().zip(s) {
                            o.axpy(w, v);
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// `R_ε`: time convolution at an adaptively chosen width plus `ε/2`.
#[derive(Clone, Debug)]
pub struct Mollifier {
    pub epsilon: f64,
    pub kernel: Kernel,
    /// Widths are searched in `[min_width, max_width]`.
    pub min_width: f64,
    pub max_width: f64,
}

/// Result of mollifying a sampled field.
#[derive(Clone, Debug)]
pub struct Mollified {
    pub width: f64,
    pub convolution_error: f64,
    pub values: Vec<Vec<f64>>,
    pub rates: Vec<Vec<f64>>,
}

fn sup_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

impl Mollifier {
    pub fn new(epsilon: f64, dt: f64, horizon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Mollifier {
            epsilon,
            kernel: Kernel::new(),
            min_width: 1e-3 * dt,
            max_width: (0.25 * horizon).max(dt),
        })
    }

    fn convolve(&self, samples: &[Vec<f64>], dt: f64, width: f64) -> (TimeConvolution, Vec<Vec<f64>>) {
        let conv = TimeConvolution::new(&self.kernel, samples.len(), dt, width);
        let out = TimeConvolution::apply(&conv.value, samples);
        (conv, out)
    }

    /// Largest width in the search range with `‖δ∗k − δ‖∞ ≤ ε/2` on the
    /// samples (bisection).
    pub fn width_for(&self, samples: &[Vec<f64>], dt: f64) -> Result<f64> {
        let target = 0.5 * self.epsilon;
        let err = |h: f64| sup_diff(&self.convolve(samples, dt, h).1, samples);
        if err(self.max_width) <= target {
            return Ok(self.max_width);
        }
        let e_min = err(self.min_width);
        if e_min > target {
            return Err(Error::WidthSearchFailure {
                best_error: e_min,
                target,
            });
        }
        let (mut lo, mut hi) = (self.min_width, self.max_width);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if err(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    /// `R_εδ` on samples `values[level][node]` with spacing `dt`.
    pub fn apply(&self, samples: &[Vec<f64>], dt: f64) -> Result<Mollified> {
        let width = self.width_for(samples, dt)?;
        let (conv, smooth) = self.convolve(samples, dt, width);
        let convolution_error = sup_diff(&smooth, samples);
        let shift = 0.5 * self.epsilon;
        let values: Vec<Vec<f64>> = smooth.into_iter().map(|v| v.into_iter().map(|x| x + shift).collect()).collect();
        let rates = TimeConvolution::apply(&conv.rate, samples);
        debug_assert!(self.check(samples, &values).is_ok());
        Ok(Mollified {
            width,
            convolution_error,
            values,
            rates,
        })
    }

    /// Checks `R_εδ ≥ δ` and `sup|R_εδ| ≤ sup|δ| + ε` pointwise.
    pub fn check(&self, samples: &[Vec<f64>], mollified: &[Vec<f64>]) -> std::result::Result<(), String> {
        let tol = 1e-12 * (1.0 + self.epsilon);
        let sup = samples.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
        for (j, (s, m)) in samples.iter().zip(mollified).enumerate() {
            for (p, (x, y)) in s.iter().zip(m).enumerate() {
                if *y < *x - tol {
                    return Err(format!("below the input at level {j}, node {p}: {y} < {x}"));
                }
                if y.abs() > sup + self.epsilon + tol {
                    return Err(format!("sup bound violated at level {j}, node {p}"));
                }
            }
        }
        Ok(())
    }
}

/// Fixed-point loop settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Regularization `ε` relative to the radius.
    pub epsilon_over_radius: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub relaxation: f64,
    /// Re-solve at the accepted iterate to measure self-consistency.
    pub self_consistency: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon_over_radius: 0.02,
            tolerance: 1e-6,
            max_iterations: 50,
            relaxation: 0.7,
            self_consistency: true,
        }
    }
}

impl SolverOptions {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.epsilon_over_radius > 0.0 && self.epsilon_over_radius.is_finite()) {
            v.push(format!("solver.epsilon_over_radius must be positive (got {})", self.epsilon_over_radius));
        }
        if !(self.tolerance > 0.0) {
            v.push(format!("solver.tolerance must be positive (got {})", self.tolerance));
        }
        if self.max_iterations == 0 {
            v.push("solver.max_iterations must be at least 1".into());
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            v.push(format!("solver.relaxation must lie in (0, 1] (got {})", self.relaxation));
        }
        v
    }
}

/// A discretized problem: basis, data and time grid.
#[derive(Clone, Debug)]
pub struct Problem {
    pub galerkin: Galerkin,
    pub forcing: ForcingProfile,
    pub initial: InitialData,
    pub dt: f64,
    pub steps: usize,
}

impl Problem {
    pub fn new(galerkin: Galerkin, forcing: ForcingProfile, initial: InitialData, dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0 && t_end > 0.0) {
            return Err(Error::InvalidArgument(format!("dt = {dt} and T = {t_end} must be positive")));
        }
        let steps = (t_end / dt).round().max(1.0) as usize;
        Ok(Problem {
            galerkin,
            forcing,
            initial,
            dt,
            steps,
        })
    }

    pub fn levels(&self) -> usize {
        self.steps + 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.levels()).map(|j| j as f64 * self.dt).collect()
    }

    pub fn epsilon(&self, opts: &SolverOptions) -> f64 {
        opts.epsilon_over_radius * self.galerkin.geometry.radius
    }
}

/// Prescribed motion and linearization velocity on the time levels:
/// shell coefficients and velocity values at the reference volume nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Iterate {
    pub delta: Vec<Vec<f64>>,
    pub velocity: Vec<Vec<[f64; 3]>>,
}

impl Iterate {
    /// `δ ≡ η₀`, `v ≡ 0`.
    pub fn initial(problem: &Problem) -> Self {
        let g = &problem.galerkin;
        let (c, _) = g.project_displacement(&problem.initial.displacement);
        Iterate {
            delta: vec![c; problem.levels()],
            velocity: vec![vec![[0.0; 3]; g.grid.len()]; problem.levels()],
        }
    }

    /// From a full trajectory (`η`, `u`).
    pub fn from_trajectory(g: &Galerkin, traj: &Trajectory) -> Self {
        Iterate {
            delta: traj.displacement.iter().map(|a| g.shell_part(a)).collect(),
            velocity: traj.velocity.clone(),
        }
    }

    /// `(1 − θ)·self + θ·other`.
    pub fn relax(&self, other: &Iterate, theta: f64) -> Iterate {
        let mix = |a: f64, b: f64| (1.0 - theta) * a + theta * b;
        Iterate {
            delta: self
                .delta
                .iter()
                .zip(&other.delta)
                .map(|(x, y)| x.iter().zip(y).map(|(a, b)| mix(*a, *b)).collect())
                .collect(),
            velocity: self
                .velocity
                .iter()
                .zip(&other.velocity)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y)
                        .map(|(a, b)| [mix(a[0], b[0]), mix(a[1], b[1]), mix(a[2], b[2])])
                        .collect()
                })
                .collect(),
        }
    }

    /// `(sup|Δδ|, ‖Δv‖_{L²})` on the reference quadrature.
    pub fn distance(&self, other: &Iterate, g: &Galerkin, dt: f64) -> (f64, f64) {
        let mut sup = 0.0_f64;
        for (x, y) in self.delta.iter().zip(&other.delta) {
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            for j in g.shell_jets_of(&diff) {
                sup = sup.max(j.value.abs());
            }
        }
        let w: Vec<f64> = (0..g.grid.len()).map(|p| g.grid.reference_weight(p)).collect();
        let per_level: Vec<f64> = self
            .velocity
            .iter()
            .zip(&other.velocity)
            .map(|(x, y)| {
                pairwise_sum_by(0, w.len(), &|p| {
                    let d = [x[p][0] - y[p][0], x[p][1] - y[p][1], x[p][2] - y[p][2]];
                    w[p] * dot3(&d, &d)
                })
            })
            .collect();
        (sup, trapezoid(&per_level, dt).sqrt())
    }
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    pairwise_sum_by(0, values.len().saturating_sub(1), &|j| 0.5 * dt * (values[j] + values[j + 1]))
}

/// One decoupled solve.
#[derive(Clone, Debug)]
pub struct DecoupledRun {
    pub trajectory: Trajectory,
    pub motion: Motion,
    pub velocity: Vec<Vec<[f64; 3]>>,
    pub width: f64,
    pub energy_constant: f64,
}

/// Mollified motion and velocity of an iterate.
pub fn regularize(problem: &Problem, iterate: &Iterate, epsilon: f64) -> Result<(Motion, Vec<Vec<[f64; 3]>>, f64)> {
    let g = &problem.galerkin;
    let mol = Mollifier::new(epsilon, problem.dt, problem.horizon())?;
    let nodes: Vec<Vec<f64>> = iterate
        .delta
        .iter()
        .map(|c| g.shell_jets_of(c).iter().map(|j| j.value).collect())
        .collect();
    let width = mol.width_for(&nodes, problem.dt)?;
    let conv = TimeConvolution::new(&mol.kernel, problem.levels(), problem.dt, width);
    let motion = Motion {
        offset: 0.5 * epsilon,
        coefficients: TimeConvolution::apply(&conv.value, &iterate.delta),
        rates: TimeConvolution::apply(&conv.rate, &iterate.delta),
    };
    let velocity = TimeConvolution::apply(&conv.value, &iterate.velocity);
    Ok((motion, velocity, width))
}

/// `(sup E + ∫(E_slip + D)) / (E(0) + ‖P‖²_{L²})`; zero for zero data.
pub fn energy_constant(traj: &Trajectory, forcing: &ForcingProfile) -> f64 {
    let sup = traj.max_energy();
    let dissipated = pairwise_sum_by(1, traj.ledger.len(), &|j| {
        (traj.ledger[j].dissipation + traj.ledger[j].slip) * (traj.ledger[j].t - traj.ledger[j - 1].t)
    });
    let data = traj.ledger.first().map_or(0.0, |r| r.energy) + forcing.l2_squared(&traj.times);
    let num = sup + dissipated;
    if data > 0.0 {
        num / data
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Solves the linearized problem around `(R_εδ, R_εv)`.
pub fn decoupled_solve(problem: &Problem, iterate: &Iterate, epsilon: f64) -> Result<DecoupledRun> {
    let (motion, velocity, width) = regularize(problem, iterate, epsilon)?;
    let trajectory = problem.galerkin.solve(
        &motion,
        Some(&velocity),
        &problem.forcing,
        &problem.initial,
        problem.dt,
    )?;
    let energy_constant = energy_constant(&trajectory, &problem.forcing);
    Ok(DecoupledRun {
        trajectory,
        motion,
        velocity,
        width,
        energy_constant,
    })
}

/// One row of the fixed-point log.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PicardRow {
    pub iteration: usize,
    pub delta_update: f64,
    pub velocity_update: f64,
    pub update: f64,
    pub max_energy: f64,
    pub energy_constant: f64,
    pub min_radius: f64,
    pub balance_max: f64,
    pub width: f64,
}

/// Result of the fixed-point loop.
#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub log: Vec<PicardRow>,
    pub run: DecoupledRun,
    pub accepted: Iterate,
    /// Change of `(η, u)` in the stopping norms when re-solving at the
    /// accepted iterate.
    pub self_consistency: Option<f64>,
    pub contact: Option<ContactStopInfo>,
}

impl PicardOutcome {
    /// `NonConvergence` unless converged or stopped by contact.
    pub fn require_converged(&self) -> Result<()> {
        if self.converged || self.contact.is_some() {
            Ok(())
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                last_update: self.log.last().map_or(f64::NAN, |r| r.update),
            })
        }
    }
}

fn min_radius(g: &Galerkin, traj: &Trajectory) -> f64 {
    traj.displacement
        .iter()
        .flat_map(|a| g.eta_jets(a))
        .fold(f64::INFINITY, |m, j| m.min(g.geometry.radius + j.value))
}

/// Relaxed fixed-point iteration `(δ, v) ↦ (η, u)` from `δ ≡ η₀`, `v ≡ 0`.
pub fn picard_fixed_point(problem: &Problem, opts: &SolverOptions) -> Result<PicardOutcome> {
    let bad = opts.violations();
    if !bad.is_empty() {
        return Err(Error::Validation(bad));
    }
    let g = &problem.galerkin;
    let eps = problem.epsilon(opts);
    let mut iterate = Iterate::initial(problem);
    let mut log = Vec::new();
    for m in 1..=opts.max_iterations {
        let mut run = decoupled_solve(problem, &iterate, eps)?;
        for row in run.trajectory.ledger.iter_mut() {
            row.picard_iter = m;
        }
        let row_base = PicardRow {
            iteration: m,
            max_energy: run.trajectory.max_energy(),
            energy_constant: run.energy_constant,
            min_radius: min_radius(g, &run.trajectory),
            balance_max: run.trajectory.balance_summary().0,
            width: run.width,
            ..Default::default()
        };
        if let Some(contact) = run.trajectory.contact.clone() {
            log.push(row_base);
            return Ok(PicardOutcome {
                converged: false,
                iterations: m,
                log,
                run,
                accepted: iterate,
                self_consistency: None,
                contact: Some(contact),
            });
        }
        let image = Iterate::from_trajectory(g, &run.trajectory);
        let next = iterate.relax(&image, opts.relaxation);
        let (du, dv) = next.distance(&iterate, g, problem.dt);
        log.push(PicardRow {
            delta_update: du,
            velocity_update: dv,
            update: du + dv,
            ..row_base
        });
        if du + dv <= opts.tolerance {
            let mut self_consistency = None;
            let mut final_run = run;
            if opts.self_consistency {
                let mut again = decoupled_solve(problem, &next, eps)?;
                if again.trajectory.contact.is_none() {
                    let image2 = Iterate::from_trajectory(g, &again.trajectory);
                    let (a, b) = image2.distance(&image, g, problem.dt);
                    self_consistency = Some(a + b);
                    for row in again.trajectory.ledger.iter_mut() {
                        row.picard_iter = m + 1;
                    }
                    final_run = again;
                }
            }
            return Ok(PicardOutcome {
                converged: true,
                iterations: m,
                log,
                run: final_run,
                accepted: next,
                self_consistency,
                contact: None,
            });
        }
        iterate = next;
        if m == opts.max_iterations {
            return Ok(PicardOutcome {
                converged: false,
                iterations: m,
                log,
                run,
                accepted: iterate,
                self_consistency: None,
                contact: None,
            });
        }
    }
    unreachable!("max_iterations is validated to be at least one")
}

/// Time-space samples of a run used for Cauchy distances.
#[derive(Clone, Debug)]
pub struct RunSamples {
    pub label: String,
    pub dt: f64,
    /// `u` at the reference volume nodes per level.
    pub velocity: Vec<Vec<[f64; 3]>>,
    pub volume_weights: Vec<f64>,
    /// `∂ₜη` and `∇²η` jets at the surface nodes per level.
    pub shell_rate: Vec<Vec<f64>>,
    pub shell: Vec<Vec<ShellJet>>,
    pub surface_weights: Vec<f64>,
}

impl RunSamples {
    pub fn new(label: impl Into<String>, g: &Galerkin, traj: &Trajectory, dt: f64) -> Self {
        RunSamples {
            label: label.into(),
            dt,
            velocity: traj.velocity.clone(),
            volume_weights: (0..g.grid.len()).map(|p| g.grid.reference_weight(p)).collect(),
            shell_rate: traj
                .velocity_coefficients
                .iter()
                .map(|b| g.eta_jets(b).iter().map(|j| j.value).collect())
                .collect(),
            shell: traj.displacement.iter().map(|a| g.eta_jets(a)).collect(),
            surface_weights: g.surface.weights(),
        }
    }

    fn compatible(&self, o: &RunSamples) -> bool {
        self.velocity.len() == o.velocity.len()
            && self.volume_weights.len() == o.volume_weights.len()
            && self.surface_weights.len() == o.surface_weights.len()
            && (self.dt - o.dt).abs() <= 1e-14 * self.dt
    }
}

/// Pairwise L²-in-time-space distances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchyTable {
    pub labels: Vec<String>,
    pub velocity: Vec<Vec<f64>>,
    pub shell_rate: Vec<Vec<f64>>,
    pub hessian: Vec<Vec<f64>>,
}

impl CauchyTable {
    /// Distances between consecutive levels.
    pub fn consecutive(table: &[Vec<f64>]) -> Vec<f64> {
        (1..table.len()).map(|i| table[i - 1][i]).collect()
    }

    pub fn strictly_decreasing(table: &[Vec<f64>]) -> bool {
        let c = Self::consecutive(table);
        c.windows(2).all(|w| w[1] < w[0])
    }
}

/// Cauchy tables across levels (at least three).
pub fn convergence_diagnostics(runs: &[RunSamples]) -> Result<CauchyTable> {
    if runs.len() < 3 {
        return Err(Error::InvalidArgument("convergence diagnostics need at least three levels".into()));
    }
    for r in &runs[1..] {
        if !r.compatible(&runs[0]) {
            return Err(Error::InvalidArgument(format!(
                "run '{}' does not share the time grid and quadrature of '{}'",
                r.label, runs[0].label
            )));
        }
    }
    let n = runs.len();
    let mut t = CauchyTable {
        labels: runs.iter().map(|r| r.label.clone()).collect(),
        velocity: vec![vec![0.0; n]; n],
        shell_rate: vec![vec![0.0; n]; n],
        hessian: vec![vec![0.0; n]; n],
    };
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&runs[i], &runs[j]);
            let wv = &a.volume_weights;
            let ws = &a.surface_weights;
            let vel: Vec<f64> = a
                .velocity
                .iter()
                .zip(&b.velocity)
                .map(|(x, y)| {
                    pairwise_sum_by(0, wv.len(), &|p| {
                        let d = [x[p][0] - y[p][0], x[p][1] - y[p][1], x[p][2] - y[p][2]];
                        wv[p] * dot3(&d, &d)
                    })
                })
                .collect();
            let rate: Vec<f64> = a
                .shell_rate
                .iter()
                .zip(&b.shell_rate)
                .map(|(x, y)| pairwise_sum_by(0, ws.len(), &|p| ws[p] * (x[p] - y[p]).powi(2)))
                .collect();
            let hess: Vec<f64> = a
                .shell
                .iter()
                .zip(&b.shell)
                .map(|(x, y)| pairwise_sum_by(0, ws.len(), &|p| ws[p] * x[p].add(&y[p].scaled(-1.0)).hessian_sq()))
                .collect();
            let dv = trapezoid(&vel, a.dt).sqrt();
            let dr = trapezoid(&rate, a.dt).sqrt();
            let dh = trapezoid(&hess, a.dt).sqrt();
            t.velocity[i][j] = dv;
            t.velocity[j][i] = dv;
            t.shell_rate[i][j] = dr;
            t.shell_rate[j][i] = dr;
            t.hessian[i][j] = dh;
            t.hessian[j][i] = dh;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_samples(f: &dyn Fn(f64, f64) -> f64, levels: usize, dt: f64, nodes: usize) -> Vec<Vec<f64>> {
        (0..levels)
            .map(|j| (0..nodes).map(|p| f(j as f64 * dt, p as f64 / nodes as f64)).collect())
            .collect()
    }

    #[test]
    fn kernel_has_unit_mass() {
        let k = Kernel::new();
        let (x, w) = gauss_legendre(80);
        let m: f64 = x.iter().zip(&w).map(|(x, w)| w * k.eval(*x).0).sum();
        assert!((m - 1.0).abs() < 1e-10);
        let d: f64 = x.iter().zip(&w).map(|(x, w)| w * k.eval(*x).1).sum();
        assert!(d.abs() < 1e-10);
    }

    #[test]
    fn constants_are_shifted_by_half_epsilon() {
        let eps = 0.1;
        let mol = Mollifier::new(eps, 0.01, 1.0).unwrap();
        let s = grid_samples(&|_, _| 0.3, 101, 0.01, 5);
        let out = mol.apply(&s, 0.01).unwrap();
        for (row, rate) in out.values.iter().zip(&out.rates) {
            for (v, r) in row.iter().zip(rate) {
                assert!((v - 0.35).abs() < 1e-12);
                assert!(r.abs() < 1e-10);
            }
        }
        mol.check(&s, &out.values).unwrap();
    }

    #[test]
    fn linear_up_to_the_shift_at_fixed_width() {
        let dt = 0.01;
        let k = Kernel::new();
        let conv = TimeConvolution::new(&k, 51, dt, 0.07);
        let a = grid_samples(&|t, x| (3.0 * t).sin() + x, 51, dt, 4);
        let b = grid_samples(&|t, x| t * t - x, 51, dt, 4);
        let sum: Vec<Vec<f64>> = a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect();
        let ca = TimeConvolution::apply(&conv.value, &a);
        let cb = TimeConvolution::apply(&conv.value, &b);
        let cs = TimeConvolution::apply(&conv.value, &sum);
        let eps = 0.05;
        for j in 0..51 {
            for p in 0..4 {
                let r = (cs[j][p] + eps / 2.0) - (ca[j][p] + eps / 2.0) - (cb[j][p] + eps / 2.0);
                assert!((r + eps / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rates_differentiate_the_convolution() {
        let dt = 0.005;
        let k = Kernel::new();
        let levels = 201;
        let s = grid_samples(&|t, _| (4.0 * t).sin() + t * t, levels, dt, 1);
        let conv = TimeConvolution::new(&k, levels, dt, 0.05);
        let v = TimeConvolution::apply(&conv.value, &s);
        let r = TimeConvolution::apply(&conv.rate, &s);
        for j in 20..levels - 20 {
            let fd = (v[j + 1][0] - v[j - 1][0]) / (2.0 * dt);
            assert!((fd - r[j][0]).abs() < 1e-3, "{j}: {fd} vs {}", r[j][0]);
        }
    }

    #[test]
    fn error_vanishes_with_epsilon_for_smooth_input() {
        let dt = 0.01;
        let s = grid_samples(&|t, x| 0.1 * (2.0 * t + x).sin(), 101, dt, 6);
        let mut prev = f64::INFINITY;
        for eps in [0.1, 0.05, 0.025] {
            let mol = Mollifier::new(eps, dt, 1.0).unwrap();
            let out = mol.apply(&s, dt).unwrap();
            mol.check(&s, &out.values).unwrap();
            let err = sup_diff(&out.values, &s);
            assert!(err <= eps + 1e-12);
            assert!(err < prev);
            prev = err;
        }
    }

    #[test]
    fn pathological_input_fails_width_search() {
        let dt = 0.01;
        let s = grid_samples(&|t, _| if ((t / dt).round() as i64) % 2 == 0 { 0.0 } else { 1e9 }, 21, dt, 1);
        let mol = Mollifier::new(0.01, dt, 0.2).unwrap();
        assert!(matches!(mol.apply(&s, dt), Err(Error::WidthSearchFailure { .. })));
    }

    #[test]
    fn identical_runs_have_zero_distance() {
        let table = vec![vec![0.0; 3]; 3];
        assert_eq!(CauchyTable::consecutive(&table), vec![0.0, 0.0]);
        assert!(!CauchyTable::strictly_decreasing(&table));
    }

    use crate::forms::PressureProfile;
    use crate::galerkin::{ModelOptions, Physics};
    use crate::geometry::ReferenceGeometry;
    use crate::koiter::ShellModel;
    use crate::spaces::{FluidReferenceBasis, ShellBasis, StokesGrid};

    fn problem(amplitude: f64, t_end: f64, dt: f64) -> Problem {
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
            shell_model: ShellModel::Linear,
            ..Default::default()
        };
        let g = Galerkin::new(geom, Physics::default(), opts, shell, fluid, 8, 4).unwrap();
        let forcing = ForcingProfile {
            inlet: PressureProfile::Pulse {
                t0: 0.0,
                width: 0.2,
                amplitude,
            },
            outlet: PressureProfile::Constant(0.0),
        };
        Problem::new(g, forcing, InitialData::default(), dt, t_end).unwrap()
    }

    #[test]
    fn zero_data_converges_immediately() {
        let p = problem(0.0, 0.2, 0.02);
        let out = picard_fixed_point(&p, &SolverOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!(out.run.trajectory.displacement.iter().all(|a| a.amax() == 0.0));
        assert_eq!(out.run.energy_constant, 0.0);
    }

    #[test]
    fn small_pulse_converges_monotonically() {
        let p = problem(0.5, 0.3, 0.02);
        let out = picard_fixed_point(&p, &SolverOptions::default()).unwrap();
        assert!(out.converged, "log {:?}", out.log);
        for w in out.log.windows(2) {
            assert!(w[1].update <= 1.1 * w[0].update, "log {:?}", out.log);
        }
        let sc = out.self_consistency.unwrap();
        assert!(sc <= SolverOptions::default().tolerance, "self consistency {sc}");
        let c = out.run.energy_constant;
        assert!(c.is_finite() && c > 0.0);
    }

    #[test]
    fn large_suction_stops_at_contact() {
        let p = problem(-400.0, 0.6, 0.01);
        let out = picard_fixed_point(&p, &SolverOptions::default()).unwrap();
        let contact = out.contact.clone().expect("contact stop");
        assert!(contact.t_star > 0.0 && contact.t_star < p.horizon());
        let g = &p.galerkin;
        for a in &out.run.trajectory.displacement {
            for j in g.eta_jets(a) {
                assert!(g.geometry.radius + j.value >= g.geometry.margin);
                assert!(j.value.abs() < g.geometry.bound);
            }
        }
        assert!(out.require_converged().is_ok());
    }
}
