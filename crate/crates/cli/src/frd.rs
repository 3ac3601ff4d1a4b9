//! Frequency response data (FRD) CSV files.
//!
//! One row per frequency with the real and imaginary parts of the four dq
//! matrix entries:
//!
//! ```text
//! f_hz,re_zdd,im_zdd,re_zdq,im_zdq,re_zqd,im_zqd,re_zqq,im_zqq
//! ```
//!
//! The converter file holds the converter admittance `Y_c` (generator
//! convention, as produced by the analytic model); the grid file holds the
//! grid impedance `Z_g`.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use paulistab_core::freqresp::{hz_to_rad, rad_to_hz};
use paulistab_core::pauli::{decompose, DqMatrix, PauliQuaternion};
use paulistab_core::stability::LoopPoint;

pub const FRD_HEADER: &str = "f_hz,re_zdd,im_zdd,re_zdq,im_zdq,re_zqd,im_zqd,re_zqq,im_zqq";

pub const QUATERNION_HEADER: &str = "f_hz,re_q0,im_q0,re_q1,im_q1,re_q2,im_q2,re_q3,im_q3";

#[derive(Debug)]
pub enum FrdError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        line: usize,
        message: String,
    },
    NonMonotonicFrequency {
        line: usize,
    },
    /// The two files of a measured pair do not share their frequency column.
    FrequencyMismatch {
        row: usize,
    },
}

impl fmt::Display for FrdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrdError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            FrdError::Parse { line, message } => write!(f, "line {line}: {message}"),
            FrdError::NonMonotonicFrequency { line } => {
                write!(f, "line {line}: frequencies must be strictly increasing")
            }
            FrdError::FrequencyMismatch { row } => {
                write!(f, "data row {row}: converter and grid files have different frequencies")
            }
        }
    }
}

impl std::error::Error for FrdError {}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrdRow {
    pub f_hz: f64,
    pub m: DqMatrix,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasuredFrd {
    pub rows: Vec<FrdRow>,
}

impl MeasuredFrd {
    pub fn quaternions(&self) -> impl Iterator<Item = (f64, PauliQuaternion)> + '_ {
        self.rows.iter().map(|r| (r.f_hz, decompose(&r.m)))
    }
}

pub fn parse_frd(text: &str) -> Result<MeasuredFrd, FrdError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(FrdError::Parse { line: 1, message: "empty file".into() })?;
    if header.trim().trim_start_matches('\u{feff}') != FRD_HEADER {
        return Err(FrdError::Parse { line: 1, message: format!("header must be `{FRD_HEADER}`") });
    }
    let mut rows = Vec::new();
    for (idx, l) in lines {
        let line = idx + 1;
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 9 {
            return Err(FrdError::Parse { line, message: format!("expected 9 fields, got {}", fields.len()) });
        }
        let mut v = [0.0; 9];
        for (slot, s) in v.iter_mut().zip(&fields) {
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| FrdError::Parse { line, message: format!("`{s}` is not a finite number") })?;
        }
        if !(v[0] > 0.0) {
            return Err(FrdError::Parse { line, message: "frequency must be > 0".into() });
        }
        if let Some(prev) = rows.last().map(|r: &FrdRow| r.f_hz) {
            if v[0] <= prev {
                return Err(FrdError::NonMonotonicFrequency { line });
            }
        }
        let c = |k: usize| Complex64::new(v[k], v[k + 1]);
        rows.push(FrdRow { f_hz: v[0], m: DqMatrix::new(c(1), c(3), c(5), c(7)) });
    }
    if rows.is_empty() {
        return Err(FrdError::Parse { line: 2, message: "no data rows".into() });
    }
    Ok(MeasuredFrd { rows })
}

pub fn load_frd(path: &Path) -> Result<MeasuredFrd, FrdError> {
    let text = std::fs::read_to_string(path).map_err(|e| FrdError::Io { path: path.to_path_buf(), source: e })?;
    parse_frd(&text)
}

/// Shortest representation that parses back to the same `f64`.
fn num(out: &mut String, x: f64) {
    write!(out, "{x:?}").unwrap();
}

pub fn format_frd(data: &MeasuredFrd) -> String {
    let mut out = String::with_capacity(64 * (data.rows.len() + 1));
    out.push_str(FRD_HEADER);
    out.push('\n');
    for r in &data.rows {
        num(&mut out, r.f_hz);
        for c in [r.m.dd, r.m.dq, r.m.qd, r.m.qq] {
            out.push(',');
            num(&mut out, c.re);
            out.push(',');
            num(&mut out, c.im);
        }
        out.push('\n');
    }
    out
}

pub fn write_frd(path: &Path, data: &MeasuredFrd) -> Result<(), FrdError> {
    std::fs::write(path, format_frd(data)).map_err(|e| FrdError::Io { path: path.to_path_buf(), source: e })
}

/// Quaternion components per row, as CSV.
pub fn format_quaternions(data: &MeasuredFrd) -> String {
    let mut out = String::new();
    out.push_str(QUATERNION_HEADER);
    out.push('\n');
    for (f, q) in data.quaternions() {
        num(&mut out, f);
        for c in q.coeffs() {
            out.push(',');
            num(&mut out, c.re);
            out.push(',');
            num(&mut out, c.im);
        }
        out.push('\n');
    }
    out
}

/// Pairs a converter-admittance file with a grid-impedance file.
///
/// The converter admittance is negated into load convention, matching the
/// analytic pipeline.
pub fn loop_points(converter: &MeasuredFrd, grid: &MeasuredFrd) -> Result<Vec<LoopPoint>, FrdError> {
    if converter.rows.len() != grid.rows.len() {
        return Err(FrdError::FrequencyMismatch { row: converter.rows.len().min(grid.rows.len()) + 1 });
    }
    converter
        .rows
        .iter()
        .zip(&grid.rows)
        .enumerate()
        .map(|(i, (c, g))| {
            if c.f_hz != g.f_hz {
                return Err(FrdError::FrequencyMismatch { row: i + 1 });
            }
            Ok(LoopPoint { omega: hz_to_rad(c.f_hz), z: decompose(&g.m), y: -decompose(&c.m) })
        })
        .collect()
}

/// Builds FRD rows from `(omega, matrix)` samples.
pub fn from_samples(samples: impl IntoIterator<Item = (f64, DqMatrix)>) -> MeasuredFrd {
    MeasuredFrd { rows: samples.into_iter().map(|(w, m)| FrdRow { f_hz: rad_to_hz(w), m }).collect() }
}
