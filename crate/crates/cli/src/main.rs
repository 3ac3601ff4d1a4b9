use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use paulistab::analysis::{export_frd, override_settings, run_analysis, run_oracle, verdict_exit_code, AppError};
use paulistab::config::{load_config, AnalysisConfig, Source};
use paulistab::emit::emit;
use paulistab::frd::{format_quaternions, load_frd};

/// Impedance-based stability analysis of grid-connected converters in the
/// dq frame.
///
/// Exit status: 0 stable, 1 unstable, 2 marginal, 3 configuration error,
/// 4 bad frequency response data, 5 numerical failure, 6 I/O error.
#[derive(Parser)]
#[command(name = "paulistab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep the minor loop, decide stability and write the report files.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Retune the PLL to this bandwidth in Hz.
        #[arg(long = "pll-bw")]
        pll_bw: Option<f64>,
        /// Converter admittance and grid impedance FRD files.
        #[arg(long, num_args = 2, value_names = ["CONV_CSV", "GRID_CSV"])]
        measured: Option<Vec<PathBuf>>,
        #[arg(long)]
        fmin: Option<f64>,
        #[arg(long)]
        fmax: Option<f64>,
        #[arg(long)]
        ppd: Option<usize>,
    },
    /// Print the Pauli components of every row of an FRD file.
    Decompose {
        #[arg(long)]
        frd: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-loop state-space eigenvalues. Exits 1 when any lies in the
    /// right half plane.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "pll-bw")]
        pll_bw: Option<f64>,
        #[arg(long = "pade-order")]
        pade_order: Option<usize>,
    },
    /// Write the analytic converter admittance and grid impedance as FRD
    /// files.
    ExportFrd {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "pll-bw")]
        pll_bw: Option<f64>,
    },
}

// Like println!, but a closed pipe (`| head`) is not an error.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

fn config_with(path: &Path, pll_bw: Option<f64>) -> Result<AnalysisConfig, AppError> {
    let mut cfg = load_config(path)?;
    if pll_bw.is_some() {
        cfg.pll_bandwidth_override = pll_bw;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, AppError> {
    match cli.command {
        Command::Analyze { config, out, pll_bw, measured, fmin, fmax, ppd } => {
            let mut cfg = config_with(&config, pll_bw)?;
            if let Some(m) = measured {
                cfg.source = Source::Measured { converter: m[0].clone(), grid: m[1].clone() };
            }
            cfg.settings = override_settings(&cfg.settings, fmin, fmax, ppd);
            cfg.validate()?;
            let report = run_analysis(&cfg)?;
            emit(&report, &out)?;
            say!(
                "{}: {} encirclements, f_c = {:.2} Hz, min distance {:.4}",
                report.verdict,
                report.encirclements,
                report.f_c_hz,
                report.min_distance
            );
            for t in &report.ranking {
                say!("  l{} |{:.4}| {:.1} deg", t.index, t.magnitude, t.phase_deg);
            }
            say!("report written to {}", out.display());
            Ok(verdict_exit_code(report.verdict))
        }
        Command::Decompose { frd, out } => {
            let text = format_quaternions(&load_frd(&frd)?);
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| AppError::Io { path: p, source: e })?,
                None => {
                    let _ = std::io::stdout().write_all(text.as_bytes());
                }
            }
            Ok(0)
        }
        Command::Oracle { config, pll_bw, pade_order } => {
            let mut cfg = config_with(&config, pll_bw)?;
            if let Some(n) = pade_order {
                cfg.pade_order = n;
            }
            let ev = run_oracle(&cfg)?;
            say!("re,im,f_hz");
            for e in &ev {
                say!("{:?},{:?},{:?}", e.re, e.im, e.im / std::f64::consts::TAU);
            }
            let rhp = ev.iter().filter(|e| e.re > 0.0).count();
            eprintln!("{} eigenvalues, {rhp} in the right half plane", ev.len());
            Ok(i32::from(rhp > 0))
        }
        Command::ExportFrd { config, out, pll_bw } => {
            let cfg = config_with(&config, pll_bw)?;
            let (c, g) = export_frd(&cfg, &out)?;
            say!("{}\n{}", c.display(), g.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
