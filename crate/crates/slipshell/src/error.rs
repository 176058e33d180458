use thiserror::Error;

/// Errors raised by the geometry, operators, solver, driver and IO layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contact violation: sup|eta| = {sup_abs} reaches the radius {radius}")]
    ContactViolation { sup_abs: f64, radius: f64 },
    #[error("invalid cutoff: max slope {max_slope} must stay below 1/M = {limit}")]
    InvalidCutoff { max_slope: f64, limit: f64 },
    #[error("degenerate domain map: det = {det} at node {node}")]
    DegenerateMap { det: f64, node: usize },
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),
    #[error("invalid slip length alpha = {0}")]
    InvalidSlipLength(f64),
    #[error("zero denominator in ratio")]
    ZeroDenominator,
    #[error("singular step matrix at t = {t}")]
    SingularSystem { t: f64 },
    #[error("mollifier width search failed: best error {best_error} exceeds {target}")]
    WidthSearchFailure { best_error: f64, target: f64 },
    #[error("fixed-point iteration did not converge in {iterations} iterations (last update {last_update})")]
    NonConvergence { iterations: usize, last_update: f64 },
    #[error("contact stop at t = {t_star} ({reason})")]
    ContactStop { t_star: f64, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
