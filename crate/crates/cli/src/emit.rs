//! Report files: `report.json`, `nyquist.csv`, `nyquist.svg`,
//! `passivity.csv`, plus the `report.meta.json` sidecar.
//!
//! Everything except the sidecar is a pure function of the report, so two
//! runs on the same configuration write byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use paulistab_core::freqresp::rad_to_hz;
use paulistab_core::stability::StabilityReport;
use serde::{Deserialize, Serialize};

use crate::analysis::{verdict_exit_code, AppError};
use crate::svg::nyquist_svg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
    pub mag: f64,
    pub phase_deg: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(c: Complex64) -> Self {
        ComplexJson { re: c.re, im: c.im, mag: c.norm(), phase_deg: c.arg().to_degrees() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedComplex {
    pub name: String,
    #[serde(flatten)]
    pub value: ComplexJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankJson {
    pub term: String,
    pub mag: f64,
    pub phase_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassivityJson {
    pub min_rho: f64,
    pub at_f_hz: f64,
    pub negative_anywhere: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub verdict: String,
    pub exit_code: i32,
    pub encirclements: i64,
    pub f_c_hz: f64,
    pub min_distance: f64,
    /// `10 log10 |L_char(j w_c)|`, same definition as `nyquist.csv`.
    pub mag_db_at_f_c: f64,
    pub l_at_f_c: ComplexJson,
    pub ell: Vec<NamedComplex>,
    pub ranking: Vec<RankJson>,
    pub y0_components: Vec<NamedComplex>,
    pub ycc0_factors: Vec<NamedComplex>,
    pub phase_crossovers_hz: Vec<f64>,
    pub pole_crossings: usize,
    pub count_band_hz: [f64; 2],
    pub count_points: usize,
    pub trace_points: usize,
    pub passivity: PassivityJson,
    pub assumption: String,
}

fn named(v: &[(&'static str, Complex64)]) -> Vec<NamedComplex> {
    v.iter().map(|(n, c)| NamedComplex { name: n.to_string(), value: (*c).into() }).collect()
}

fn mag_db(c: Complex64) -> f64 {
    10.0 * c.norm().log10()
}

pub fn report_json(r: &StabilityReport) -> ReportJson {
    let b = &r.breakdown;
    let (min_rho, at) =
        r.passivity
            .iter()
            .fold((f64::INFINITY, f64::NAN), |acc, &(w, rho)| if rho < acc.0 { (rho, rad_to_hz(w)) } else { acc });
    ReportJson {
        verdict: r.verdict.as_str().to_string(),
        exit_code: verdict_exit_code(r.verdict),
        encirclements: r.encirclements,
        f_c_hz: r.f_c_hz,
        min_distance: r.min_distance,
        mag_db_at_f_c: mag_db(b.l_at_omega_c),
        l_at_f_c: b.l_at_omega_c.into(),
        ell: b
            .ell
            .iter()
            .enumerate()
            .map(|(i, l)| NamedComplex { name: format!("l{i}"), value: (*l).into() })
            .collect(),
        ranking: r
            .ranking
            .iter()
            .map(|t| RankJson { term: format!("l{}", t.index), mag: t.magnitude, phase_deg: t.phase_deg })
            .collect(),
        y0_components: named(&b.y0_components),
        ycc0_factors: named(&b.ycc0_factors),
        phase_crossovers_hz: r.phase_crossovers_hz.clone(),
        pole_crossings: r.pole_crossings,
        count_band_hz: [r.count_band_hz.0, r.count_band_hz.1],
        count_points: r.count_points,
        trace_points: r.trace.len(),
        passivity: PassivityJson { min_rho, at_f_hz: at, negative_anywhere: min_rho < 0.0 },
        assumption: r.assumption.to_string(),
    }
}

pub fn report_json_string(r: &StabilityReport) -> String {
    let mut s = serde_json::to_string_pretty(&report_json(r)).expect("report serializes");
    s.push('\n');
    s
}

pub fn nyquist_csv(r: &StabilityReport) -> String {
    let mut out = String::from("f_hz,re_L,im_L,mag_db,phase_deg\n");
    for s in &r.trace {
        writeln!(out, "{:?},{:?},{:?},{:?},{:?}", s.f_hz(), s.l_char.re, s.l_char.im, s.mag_db, s.phase_deg).unwrap();
    }
    out
}

pub fn passivity_csv(r: &StabilityReport) -> String {
    let mut out = String::from("f_hz,rho_min\n");
    for &(w, rho) in &r.passivity {
        writeln!(out, "{:?},{:?}", rad_to_hz(w), rho).unwrap();
    }
    out
}

pub fn meta_json() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let v = serde_json::json!({
        "generated_unix_s": secs,
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    });
    format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
}

/// Writes all report files into `out_dir` and returns their paths.
pub fn emit(r: &StabilityReport, out_dir: &Path) -> Result<Vec<PathBuf>, AppError> {
    let io = |p: &Path, e| AppError::Io { path: p.to_path_buf(), source: e };
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let files = [
        ("report.json", report_json_string(r)),
        ("nyquist.csv", nyquist_csv(r)),
        ("nyquist.svg", nyquist_svg(r)),
        ("passivity.csv", passivity_csv(r)),
        ("report.meta.json", meta_json()),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let p = out_dir.join(name);
        std::fs::write(&p, body).map_err(|e| io(&p, e))?;
        written.push(p);
    }
    Ok(written)
}
