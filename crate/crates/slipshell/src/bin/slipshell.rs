use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use slipshell::config::SimConfig;
use slipshell::coupling::{convergence_diagnostics, decoupled_solve, picard_fixed_point, CauchyTable, Iterate, RunSamples};
use slipshell::output::{dump_fluid_basis, dump_shell_basis, RunDirectory, RunReport};
use slipshell::spaces::SurfaceGrid;
use slipshell::verify::{SuiteReport, Verifier, VerifySettings, SUITES};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slipshell", version, about = "Fluid-shell interaction with Navier slip in a cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupled run: fixed-point iteration over the regularized linear problem.
    Simulate {
        /// TOML configuration (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Write an eta snapshot every k steps.
        #[arg(long, default_value_t = 10)]
        snapshot_every: usize,
    },
    /// One linear solve with the motion frozen at the initial shape.
    Decoupled {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        snapshot_every: usize,
    },
    /// Property suites; exits nonzero if any fails.
    Verify {
        /// Suite ids (1..=12); all when omitted.
        #[arg(long = "suite")]
        suites: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = VerifySettings::default().seed)]
        seed: u64,
        /// Also check wall-clock limits (makes report.json machine dependent).
        #[arg(long)]
        timings: bool,
    },
    /// Cauchy study over regularization or basis levels.
    Study {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// `eps:0.1,0.05,0.025` (fractions of the radius) or `n:8,16,32`.
        #[arg(long)]
        levels: String,
    },
    /// Writes basis values at the quadrature nodes as CSV.
    BasisDump {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = BasisKind::Shell)]
        kind: BasisKind,
        /// Number of modes (the configured `basis_size / 2` when omitted).
        #[arg(long)]
        count: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisKind {
    Shell,
    Fluid,
}

fn load(path: &Option<PathBuf>) -> slipshell::Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn simulate(cfg: &SimConfig, out: &Path, every: usize) -> slipshell::Result<ExitCode> {
    let dir = RunDirectory::create(out)?;
    dir.write_config(cfg)?;
    let p = cfg.problem(None)?;
    let outcome = picard_fixed_point(&p, &cfg.solver)?;
    let traj = &outcome.run.trajectory;
    dir.write_ledger(traj)?;
    dir.write_picard(&outcome.log)?;
    dir.write_snapshots(&p.galerkin, traj, every)?;
    let d = &cfg.discretization;
    let report = RunReport::picard(&p.galerkin, &outcome, p.dt, d.t_end, p.epsilon(&cfg.solver));
    dir.write_report(&report)?;
    println!("status {} after {} iterations", report.status, outcome.iterations);
    if let Some(t) = report.t_star {
        println!("t_star {}", slipshell::numerics::fmt17(t));
    }
    Ok(if report.status == "not_converged" { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn decoupled(cfg: &SimConfig, out: &Path, every: usize) -> slipshell::Result<ExitCode> {
    let dir = RunDirectory::create(out)?;
    dir.write_config(cfg)?;
    let p = cfg.problem(None)?;
    let eps = p.epsilon(&cfg.solver);
    let run = decoupled_solve(&p, &Iterate::initial(&p), eps)?;
    dir.write_ledger(&run.trajectory)?;
    dir.write_snapshots(&p.galerkin, &run.trajectory, every)?;
    let report = RunReport::new(
        "decoupled",
        &p.galerkin,
        &run.trajectory,
        p.dt,
        cfg.discretization.t_end,
        eps,
        run.width,
        run.energy_constant,
    );
    dir.write_report(&report)?;
    println!("status {}", report.status);
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct VerifyReport {
    command: &'static str,
    seed: u64,
    passed: bool,
    suites: Vec<SuiteReport>,
}

fn verify(suites: &[usize], out: &Option<PathBuf>, seed: u64, timings: bool) -> slipshell::Result<ExitCode> {
    let ids: Vec<usize> = if suites.is_empty() { (1..=SUITES.len()).collect() } else { suites.to_vec() };
    if let Some(bad) = ids.iter().find(|i| **i == 0 || **i > SUITES.len()) {
        return Err(slipshell::Error::InvalidArgument(format!("suite {bad} (valid: 1..={})", SUITES.len())));
    }
    let mut v = Verifier::new(VerifySettings { seed, timings });
    let mut reports = Vec::new();
    for id in ids {
        let r = v.run(id);
        println!("{}", r.line());
        reports.push(r);
    }
    let passed = reports.iter().all(|r| r.passed);
    if let Some(dir) = out {
        let dir = RunDirectory::create(dir)?;
        dir.write_report(&VerifyReport {
            command: "verify",
            seed,
            passed,
            suites: reports,
        })?;
    }
    Ok(if passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[derive(Serialize)]
struct StudyReport {
    command: &'static str,
    family: String,
    labels: Vec<String>,
    energy_constants: Vec<f64>,
    iterations: Vec<usize>,
    velocity_distances: Vec<f64>,
    shell_rate_distances: Vec<f64>,
    hessian_distances: Vec<f64>,
    strictly_decreasing: bool,
}

enum Levels {
    Epsilon(Vec<f64>),
    Basis(Vec<usize>),
}

fn parse_levels(spec: &str) -> slipshell::Result<Levels> {
    let bad = || slipshell::Error::InvalidArgument(format!("levels `{spec}`: expected eps:a,b,... or n:a,b,..."));
    let (family, list) = spec.split_once(':').ok_or_else(bad)?;
    let items: Vec<&str> = list.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.len() < 2 {
        return Err(bad());
    }
    match family.trim() {
        "eps" | "epsilon" => items
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()
            .map(Levels::Epsilon),
        "n" => items
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()
            .map(Levels::Basis),
        _ => Err(bad()),
    }
}

fn study(cfg: &SimConfig, out: &Path, levels: &str) -> slipshell::Result<ExitCode> {
    let levels = parse_levels(levels)?;
    let dir = RunDirectory::create(out)?;
    dir.write_config(cfg)?;
    let runs: Vec<(String, SimConfig, Option<usize>)> = match &levels {
        Levels::Epsilon(list) => list
            .iter()
            .map(|e| {
                let mut c = cfg.clone();
                c.solver.epsilon_over_radius = *e;
                (format!("eps={e}"), c, None)
            })
            .collect(),
        Levels::Basis(list) => list.iter().map(|n| (format!("n={n}"), cfg.clone(), Some(*n))).collect(),
    };
    let mut samples = Vec::new();
    let mut constants = Vec::new();
    let mut iterations = Vec::new();
    for (label, c, n) in &runs {
        let p = c.problem(*n)?;
        let outcome = picard_fixed_point(&p, &c.solver)?;
        outcome.require_converged()?;
        let sub = RunDirectory::create(&dir.path(&label.replace('=', "_")))?;
        sub.write_ledger(&outcome.run.trajectory)?;
        sub.write_picard(&outcome.log)?;
        println!("{label}: {} iterations, C = {}", outcome.iterations, outcome.run.energy_constant);
        constants.push(outcome.run.energy_constant);
        iterations.push(outcome.iterations);
        samples.push(RunSamples::new(label.clone(), &p.galerkin, &outcome.run.trajectory, p.dt));
    }
    let table = convergence_diagnostics(&samples)?;
    dir.write_cauchy(&table)?;
    let decreasing = CauchyTable::strictly_decreasing(&table.velocity)
        && CauchyTable::strictly_decreasing(&table.shell_rate)
        && CauchyTable::strictly_decreasing(&table.hessian);
    dir.write_report(&StudyReport {
        command: "study",
        family: match levels {
            Levels::Epsilon(_) => "epsilon".into(),
            Levels::Basis(_) => "basis_size".into(),
        },
        labels: table.labels.clone(),
        energy_constants: constants,
        iterations,
        velocity_distances: CauchyTable::consecutive(&table.velocity),
        shell_rate_distances: CauchyTable::consecutive(&table.shell_rate),
        hessian_distances: CauchyTable::consecutive(&table.hessian),
        strictly_decreasing: decreasing,
    })?;
    println!("distances strictly decreasing: {decreasing}");
    Ok(ExitCode::SUCCESS)
}

fn basis_dump(cfg: &SimConfig, out: &Path, kind: BasisKind, count: Option<usize>) -> slipshell::Result<ExitCode> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let count = count.unwrap_or(cfg.discretization.basis_size / 2);
    match kind {
        BasisKind::Shell => {
            let g = cfg.galerkin(None)?;
            let grid = SurfaceGrid::gauss(cfg.geometry.length, cfg.discretization.grid_n_theta, cfg.discretization.grid_nz);
            dump_shell_basis(out, &g.shell, &grid, count.min(g.shell.len()))?;
        }
        BasisKind::Fluid => {
            let mut c = cfg.clone();
            c.discretization.fluid_modes = c.discretization.fluid_modes.max(count);
            let g = c.galerkin(None)?;
            dump_fluid_basis(out, &g, count)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> slipshell::Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            snapshot_every,
        } => simulate(&load(&config)?, &out, snapshot_every),
        Command::Decoupled {
            config,
            out,
            snapshot_every,
        } => decoupled(&load(&config)?, &out, snapshot_every),
        Command::Verify {
            suites,
            out,
            seed,
            timings,
        } => verify(&suites, &out, seed, timings),
        Command::Study { config, out, levels } => study(&load(&config)?, &out, &levels),
        Command::BasisDump {
            config,
            out,
            kind,
            count,
        } => basis_dump(&load(&config)?, &out, kind, count),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
