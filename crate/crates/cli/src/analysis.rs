//! End-to-end analysis: configuration in, [`StabilityReport`] out.

use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use paulistab_core::freqresp::{FrequencyGrid, GridSettings};
use paulistab_core::oracles::closed_loop_eigs;
use paulistab_core::pauli::recompose;
use paulistab_core::stability::{
    analyze_points, analyze_with, critical_frequency, loop_sample, refined_grid, AnalyticCase, LoopPoint,
    StabilityReport, Verdict,
};
use rayon::prelude::*;

use crate::config::{AnalysisConfig, ConfigError, Source};
use crate::frd::{from_samples, load_frd, loop_points, write_frd, FrdError};

/// Environment variable capping the number of sweep threads.
pub const THREADS_ENV: &str = "PAULI_STAB_THREADS";

#[derive(Debug)]
pub enum AppError {
    Config(ConfigError),
    Frd(FrdError),
    Numeric(paulistab_core::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl AppError {
    /// Process exit code: 3 configuration, 4 input data, 5 numerics, 6 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 3,
            AppError::Frd(_) => 4,
            AppError::Numeric(_) => 5,
            AppError::Io { .. } => 6,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "configuration: {e}"),
            AppError::Frd(e) => write!(f, "frequency response data: {e}"),
            AppError::Numeric(e) => write!(f, "analysis: {e}"),
            AppError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for AppError {}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<FrdError> for AppError {
    fn from(e: FrdError) -> Self {
        AppError::Frd(e)
    }
}

impl From<paulistab_core::Error> for AppError {
    fn from(e: paulistab_core::Error) -> Self {
        AppError::Numeric(e)
    }
}

pub fn verdict_exit_code(v: Verdict) -> i32 {
    match v {
        Verdict::Stable => 0,
        Verdict::Unstable => 1,
        Verdict::Marginal => 2,
    }
}

/// Thread count from `PAULI_STAB_THREADS`, or rayon's default when unset
/// or invalid.
pub fn thread_count() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

fn pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count() {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool")
}

/// Evaluates the case on every grid frequency in parallel, keeping order.
pub fn parallel_sweep(
    case: &AnalyticCase,
    pool: &rayon::ThreadPool,
    grid: &FrequencyGrid,
) -> paulistab_core::Result<Vec<LoopPoint>> {
    pool.install(|| grid.omegas().par_iter().map(|&w| case.point(w)).collect())
}

pub fn analytic_case(cfg: &AnalysisConfig) -> Result<AnalyticCase, AppError> {
    let p = cfg.effective_converter()?;
    Ok(AnalyticCase::new(&p, &cfg.grid, cfg.u1_reference)?)
}

pub fn run_analysis(cfg: &AnalysisConfig) -> Result<StabilityReport, AppError> {
    match &cfg.source {
        Source::Analytic => {
            let case = analytic_case(cfg)?;
            let pool = pool();
            let mut report = analyze_with(&cfg.settings, |g| parallel_sweep(&case, &pool, g))?;
            case.annotate(&mut report)?;
            Ok(report)
        }
        Source::Measured { converter, grid } => run_measured(converter, grid),
    }
}

pub fn run_measured(converter: &Path, grid: &Path) -> Result<StabilityReport, AppError> {
    let c = load_frd(converter)?;
    let g = load_frd(grid)?;
    Ok(analyze_points(&loop_points(&c, &g)?)?)
}

/// The grid the analytic pipeline reports on: the coarse grid plus the
/// refinement window around its minimum.
pub fn analysis_grid(cfg: &AnalysisConfig) -> Result<FrequencyGrid, AppError> {
    let case = analytic_case(cfg)?;
    let coarse = cfg.settings.coarse_grid()?;
    let pts = parallel_sweep(&case, &pool(), &coarse)?;
    let trace: Vec<_> = pts.iter().map(|p| loop_sample(p.omega, &p.z, &p.y)).collect();
    let (f0, _) = critical_frequency(&trace)?;
    Ok(refined_grid(&coarse, f0, &cfg.settings)?)
}

/// Writes `converter.csv` (`Y_c`) and `grid.csv` (`Z_g`) sampled on the
/// analysis grid. Returns the two paths.
pub fn export_frd(cfg: &AnalysisConfig, out_dir: &Path) -> Result<(PathBuf, PathBuf), AppError> {
    let case = analytic_case(cfg)?;
    let grid = analysis_grid(cfg)?;
    let pts = parallel_sweep(&case, &pool(), &grid)?;
    // y is stored in load convention; the file carries Y_c = -y
    let conv = from_samples(pts.iter().map(|p| (p.omega, recompose(&-p.y))));
    let zg = from_samples(pts.iter().map(|p| (p.omega, recompose(&p.z))));
    std::fs::create_dir_all(out_dir).map_err(|e| AppError::Io { path: out_dir.to_path_buf(), source: e })?;
    let (cp, gp) = (out_dir.join("converter.csv"), out_dir.join("grid.csv"));
    write_frd(&cp, &conv)?;
    write_frd(&gp, &zg)?;
    Ok((cp, gp))
}

/// Closed-loop state-space eigenvalues for the configured case.
pub fn run_oracle(cfg: &AnalysisConfig) -> Result<Vec<Complex64>, AppError> {
    let p = cfg.effective_converter()?;
    let mut ev = closed_loop_eigs(&p, &cfg.grid, cfg.pade_order, cfg.u1_reference)?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(ev)
}

/// Applies command-line overrides of the sweep.
pub fn override_settings(s: &GridSettings, f_min: Option<f64>, f_max: Option<f64>, ppd: Option<usize>) -> GridSettings {
    GridSettings {
        f_min: f_min.unwrap_or(s.f_min),
        f_max: f_max.unwrap_or(s.f_max),
        points_per_decade: ppd.unwrap_or(s.points_per_decade),
        ..*s
    }
}
