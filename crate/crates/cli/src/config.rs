//! Flat `key = value` analysis configuration.
//!
//! ```text
//! # case study
//! v1 = 326
//! omega1_hz = 50
//! L = 3e-3
//! ```
//!
//! Blank lines and `#` comments are ignored. Keys are case-sensitive.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use paulistab_core::freqresp::{hz_to_rad, GridSettings};
use paulistab_core::models::{ConverterParams, GridParams, U1Reference};

#[derive(Debug)]
pub enum ConfigError {
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Parse {
        line: usize,
        message: String,
    },
    /// Missing or invalid field, named by its symbol.
    Validation {
        field: String,
        reason: String,
    },
}

impl ConfigError {
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }

    fn invalid(field: &str, reason: impl Into<String>) -> Self {
        ConfigError::Validation { field: field.to_string(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Validation { field, reason } => write!(f, "invalid {field}: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Analytic,
    /// Converter admittance and grid impedance FRD files.
    Measured {
        converter: PathBuf,
        grid: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub converter: ConverterParams,
    pub grid: GridParams,
    pub settings: GridSettings,
    pub pll_bandwidth_override: Option<f64>,
    pub u1_reference: U1Reference,
    pub pade_order: usize,
    pub source: Source,
}

impl AnalysisConfig {
    /// Converter parameters after the optional PLL retuning.
    pub fn effective_converter(&self) -> paulistab_core::Result<ConverterParams> {
        match self.pll_bandwidth_override {
            Some(bw) => paulistab_core::models::retune_pll_bandwidth(&self.converter, bw),
            None => Ok(self.converter),
        }
    }
}

// (key, symbol used in messages, required)
const NUMERIC_KEYS: &[(&str, &str, bool)] = &[
    ("v1", "V1", true),
    ("omega1_hz", "omega1", true),
    ("L", "L", true),
    ("Td", "Td", true),
    ("Lg", "Lg", true),
    ("Cg", "Cg", true),
    ("kp_cc", "Kp_cc", true),
    ("ki_cc", "Ki_cc", true),
    ("kp_pll", "Kp_pll", true),
    ("ki_pll", "Ki_pll", true),
    ("i1_d", "I1_d", true),
    ("i1_q", "I1_q", true),
    ("R", "R", false),
    ("Rg", "Rg", false),
    ("f_min", "f_min", false),
    ("f_max", "f_max", false),
    ("ppd", "ppd", false),
    ("refine_span", "refine_span", false),
    ("refine_points", "refine_points", false),
    ("pll_bw", "pll_bw", false),
    ("pade_order", "pade_order", false),
];

const TEXT_KEYS: &[&str] = &["u1_reference", "measured_converter", "measured_grid"];

fn symbol(key: &str) -> &str {
    NUMERIC_KEYS.iter().find(|k| k.0 == key).map_or(key, |k| k.1)
}

/// Parses configuration text. Relative measured-data paths resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<AnalysisConfig, ConfigError> {
    let mut nums: BTreeMap<&str, f64> = BTreeMap::new();
    let mut texts: BTreeMap<&str, String> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse { line, message: format!("expected key = value, got `{content}`") })?;
        let (k, v) = (k.trim(), v.trim());
        if let Some(&(key, _, _)) = NUMERIC_KEYS.iter().find(|e| e.0 == k) {
            let x: f64 =
                v.parse().map_err(|_| ConfigError::Parse { line, message: format!("`{k}`: `{v}` is not a number") })?;
            if nums.insert(key, x).is_some() {
                return Err(ConfigError::Parse { line, message: format!("duplicate key `{k}`") });
            }
        } else if let Some(&key) = TEXT_KEYS.iter().find(|&&e| e == k) {
            if texts.insert(key, v.to_string()).is_some() {
                return Err(ConfigError::Parse { line, message: format!("duplicate key `{k}`") });
            }
        } else {
            return Err(ConfigError::Parse { line, message: format!("unknown key `{k}`") });
        }
    }

    for &(key, sym, required) in NUMERIC_KEYS {
        if required && !nums.contains_key(key) {
            return Err(ConfigError::invalid(sym, "missing"));
        }
        if let Some(x) = nums.get(key) {
            if !x.is_finite() {
                return Err(ConfigError::invalid(sym, "must be finite"));
            }
        }
    }
    let get = |k: &str| nums[k];
    let opt = |k: &str, d: f64| nums.get(k).copied().unwrap_or(d);

    let positive = |k: &str| -> Result<f64, ConfigError> {
        let x = get(k);
        if x > 0.0 {
            Ok(x)
        } else {
            Err(ConfigError::invalid(symbol(k), "must be > 0"))
        }
    };
    let non_negative = |k: &str, x: f64| -> Result<f64, ConfigError> {
        if x >= 0.0 {
            Ok(x)
        } else {
            Err(ConfigError::invalid(symbol(k), "must be >= 0"))
        }
    };

    let converter = ConverterParams {
        v1: positive("v1")?,
        omega1: hz_to_rad(positive("omega1_hz")?),
        l: positive("L")?,
        r: non_negative("R", opt("R", 0.0))?,
        td: non_negative("Td", get("Td"))?,
        kp_cc: get("kp_cc"),
        ki_cc: get("ki_cc"),
        kp_pll: get("kp_pll"),
        ki_pll: get("ki_pll"),
        i1_d: get("i1_d"),
        i1_q: get("i1_q"),
    };
    let grid = GridParams { lg: positive("Lg")?, cg: positive("Cg")?, rg: non_negative("Rg", opt("Rg", 0.0))? };

    let d = GridSettings::default();
    let count = |k: &str, dflt: usize| -> Result<usize, ConfigError> {
        match nums.get(k) {
            None => Ok(dflt),
            Some(&x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
            Some(_) => Err(ConfigError::invalid(symbol(k), "must be a non-negative integer")),
        }
    };
    let settings = GridSettings {
        f_min: opt("f_min", d.f_min),
        f_max: opt("f_max", d.f_max),
        points_per_decade: count("ppd", d.points_per_decade)?,
        refine_span: opt("refine_span", d.refine_span),
        refine_points: count("refine_points", d.refine_points)?,
    };
    validate_settings(&settings)?;

    let pll_bandwidth_override = match nums.get("pll_bw") {
        Some(&x) if x > 0.0 => Some(x),
        Some(_) => return Err(ConfigError::invalid("pll_bw", "must be > 0")),
        None => None,
    };
    let pade_order = count("pade_order", 4)?;
    if pade_order < 1 {
        return Err(ConfigError::invalid("pade_order", "must be >= 1"));
    }
    let u1_reference = match texts.get("u1_reference").map(String::as_str) {
        None | Some("controller") => U1Reference::Controller,
        Some("terminal") => U1Reference::Terminal,
        Some(other) => {
            return Err(ConfigError::invalid("u1_reference", format!("`{other}` is not `controller` or `terminal`")))
        }
    };
    let source = match (texts.get("measured_converter"), texts.get("measured_grid")) {
        (None, None) => Source::Analytic,
        (Some(c), Some(g)) => Source::Measured { converter: base_dir.join(c), grid: base_dir.join(g) },
        (Some(_), None) => return Err(ConfigError::invalid("measured_grid", "missing")),
        (None, Some(_)) => return Err(ConfigError::invalid("measured_converter", "missing")),
    };

    let cfg = AnalysisConfig { converter, grid, settings, pll_bandwidth_override, u1_reference, pade_order, source };
    cfg.validate()?;
    Ok(cfg)
}

pub fn validate_settings(s: &GridSettings) -> Result<(), ConfigError> {
    if !(s.f_min > 0.0) {
        return Err(ConfigError::invalid("f_min", "must be > 0"));
    }
    if !(s.f_max > s.f_min) {
        return Err(ConfigError::invalid("f_max", "must exceed f_min"));
    }
    if s.points_per_decade < 1 {
        return Err(ConfigError::invalid("ppd", "must be >= 1"));
    }
    if !(s.refine_span >= 0.0) {
        return Err(ConfigError::invalid("refine_span", "must be >= 0"));
    }
    Ok(())
}

impl AnalysisConfig {
    /// Checks cross-field invariants, including that measured files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_settings(&self.settings)?;
        if let Source::Measured { converter, grid } = &self.source {
            for (field, p) in [("measured_converter", converter), ("measured_grid", grid)] {
                if !p.is_file() {
                    return Err(ConfigError::invalid(field, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<AnalysisConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.to_path_buf(), source: e })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base)
}

/// Renders a configuration in the same format. Parsing the result gives
/// back an equal configuration.
pub fn format_config(cfg: &AnalysisConfig) -> String {
    let p = &cfg.converter;
    let g = &cfg.grid;
    let s = &cfg.settings;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("v1", p.v1.to_string());
    kv("omega1_hz", paulistab_core::freqresp::rad_to_hz(p.omega1).to_string());
    kv("L", p.l.to_string());
    kv("R", p.r.to_string());
    kv("Td", p.td.to_string());
    kv("kp_cc", p.kp_cc.to_string());
    kv("ki_cc", p.ki_cc.to_string());
    kv("kp_pll", p.kp_pll.to_string());
    kv("ki_pll", p.ki_pll.to_string());
    kv("i1_d", p.i1_d.to_string());
    kv("i1_q", p.i1_q.to_string());
    kv("Lg", g.lg.to_string());
    kv("Cg", g.cg.to_string());
    kv("Rg", g.rg.to_string());
    kv("f_min", s.f_min.to_string());
    kv("f_max", s.f_max.to_string());
    kv("ppd", s.points_per_decade.to_string());
    kv("refine_span", s.refine_span.to_string());
    kv("refine_points", s.refine_points.to_string());
    kv("pade_order", cfg.pade_order.to_string());
    kv(
        "u1_reference",
        match cfg.u1_reference {
            U1Reference::Controller => "controller".into(),
            U1Reference::Terminal => "terminal".into(),
        },
    );
    if let Some(bw) = cfg.pll_bandwidth_override {
        kv("pll_bw", bw.to_string());
    }
    out
}
