use std::path::{Path, PathBuf};
use std::process::Command;

use num_complex::Complex64;
use proptest::prelude::*;

use paulistab::analysis::{export_frd, run_analysis, run_measured};
use paulistab::config::{format_config, load_config, parse_config, AnalysisConfig, ConfigError};
use paulistab::emit::{emit, nyquist_csv, report_json, report_json_string, ReportJson};
use paulistab::frd::{format_frd, load_frd, parse_frd, FrdRow, MeasuredFrd, FRD_HEADER};
use paulistab_core::pauli::{decompose, DqMatrix};
use paulistab_core::stability::Verdict;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn case_study() -> AnalysisConfig {
    load_config(&data("case_study.cfg")).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paulistab"))
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

#[test]
fn config_round_trips_through_text() {
    let cfg = case_study();
    let again = parse_config(&format_config(&cfg), Path::new(".")).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn missing_key_is_named() {
    let text = std::fs::read_to_string(data("case_study.cfg")).unwrap();
    let without: String = text.lines().filter(|l| !l.starts_with("Cg")).map(|l| format!("{l}\n")).collect();
    let err = parse_config(&without, Path::new(".")).unwrap_err();
    assert!(matches!(err, ConfigError::Validation { .. }));
    assert_eq!(err.field(), Some("Cg"));
}

#[test]
fn report_json_is_deterministic() {
    let a = run_analysis(&case_study()).unwrap();
    let b = run_analysis(&case_study()).unwrap();
    assert_eq!(report_json_string(&a), report_json_string(&b));

    let (d0, d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit(&a, d0.path()).unwrap();
    for (dir, threads) in [(&d1, "1"), (&d2, "3")] {
        let mut cmd = bin();
        cmd.env("PAULI_STAB_THREADS", threads).arg("analyze").arg("--config").arg(data("case_study.cfg"));
        assert_eq!(exit_code(cmd.arg("--out").arg(dir.path())), 1);
    }
    for f in ["report.json", "nyquist.csv", "nyquist.svg", "passivity.csv"] {
        let x = std::fs::read(d0.path().join(f)).unwrap();
        for d in [&d1, &d2] {
            assert!(x == std::fs::read(d.path().join(f)).unwrap(), "{f} differs between runs");
        }
    }
    assert!(d1.path().join("report.meta.json").is_file());
}

#[test]
fn report_json_parses_back() {
    let r = run_analysis(&case_study()).unwrap();
    let parsed: ReportJson = serde_json::from_str(&report_json_string(&r)).unwrap();
    assert_eq!(parsed, report_json(&r));
    assert_eq!(parsed.verdict, "unstable");
    assert_eq!(parsed.exit_code, 1);
    assert_eq!(parsed.ell.len(), 4);
    assert_eq!(parsed.y0_components.len(), 4);
    assert!(parsed.assumption.contains("right-half-plane") || parsed.assumption.contains("RHP"));
}

#[test]
fn mag_db_has_one_definition() {
    let r = run_analysis(&case_study()).unwrap();
    let j = report_json(&r);
    let csv = nyquist_csv(&r);
    let row = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .find(|v| v[0] == r.f_c_hz)
        .expect("f_c is a trace frequency");
    assert_eq!(row[3], j.mag_db_at_f_c);
    let l = Complex64::new(row[1], row[2]);
    assert!((10.0 * l.norm().log10() - row[3]).abs() < 1e-12);
    assert!((j.l_at_f_c.mag - r.min_distance).abs() == 0.0);
}

#[test]
fn stable_report_has_no_encirclements() {
    let mut cfg = case_study();
    cfg.pll_bandwidth_override = Some(20.0);
    let j = report_json(&run_analysis(&cfg).unwrap());
    assert_eq!((j.verdict.as_str(), j.encirclements, j.exit_code), ("stable", 0, 0));
}

#[test]
fn exported_frd_reproduces_the_analysis() {
    let cfg = case_study();
    let dir = tempfile::tempdir().unwrap();
    let (c, g) = export_frd(&cfg, dir.path()).unwrap();
    let conv = load_frd(&c).unwrap();
    assert_eq!(parse_frd(&format_frd(&conv)).unwrap(), conv);
    let a = run_analysis(&cfg).unwrap();
    let m = run_measured(&c, &g).unwrap();
    assert_eq!(m.verdict, a.verdict);
    assert_eq!(m.encirclements, a.encirclements);
    assert!((m.f_c_hz - a.f_c_hz).abs() < 1.0);
}

#[test]
fn cli_exit_codes() {
    let cfg = data("case_study.cfg");
    let out = tempfile::tempdir().unwrap();
    let o = out.path();
    assert_eq!(exit_code(bin().arg("analyze").arg("--config").arg(&cfg).arg("--out").arg(o)), 1);
    assert!(o.join("report.json").is_file());
    assert_eq!(
        exit_code(bin().arg("analyze").arg("--config").arg(&cfg).arg("--out").arg(o).args(["--pll-bw", "20"])),
        0
    );
    assert_eq!(exit_code(bin().arg("analyze").arg("--config").arg(o.join("missing.cfg"))), 3);
    assert_eq!(exit_code(bin().arg("frobnicate")), 3);
    assert_eq!(exit_code(bin().arg("--help")), 0);

    let bad = o.join("bad.csv");
    std::fs::write(&bad, "f_hz,oops\n").unwrap();
    assert_eq!(exit_code(bin().arg("decompose").arg("--frd").arg(&bad)), 4);
    assert_eq!(
        exit_code(
            bin().arg("analyze").arg("--config").arg(&cfg).arg("--out").arg(o).arg("--measured").arg(&bad).arg(&bad)
        ),
        4
    );
    assert_eq!(exit_code(bin().arg("analyze").arg("--config").arg(&cfg).args(["--fmin", "100", "--fmax", "50"])), 3);
    assert_eq!(exit_code(bin().arg("oracle").arg("--config").arg(&cfg)), 1);
    assert_eq!(exit_code(bin().arg("oracle").arg("--config").arg(&cfg).args(["--pll-bw", "20"])), 0);
}

fn identity_frd(freqs: &[f64], scale: &[f64]) -> MeasuredFrd {
    let c = |x: f64| Complex64::new(x, 0.0);
    let zero = c(0.0);
    MeasuredFrd {
        rows: freqs
            .iter()
            .zip(scale)
            .map(|(&f, &k)| FrdRow { f_hz: f, m: DqMatrix::new(c(k), zero, zero, c(k)) })
            .collect(),
    }
}

#[test]
fn grazing_trace_is_marginal() {
    // 1 + z y vanishes at the middle sample
    let f = [10.0, 20.0, 30.0, 40.0, 50.0];
    let dir = tempfile::tempdir().unwrap();
    let (c, g) = (dir.path().join("c.csv"), dir.path().join("g.csv"));
    std::fs::write(&c, format_frd(&identity_frd(&f, &[0.0, 0.5, 1.0, 0.5, 0.0]))).unwrap();
    std::fs::write(&g, format_frd(&identity_frd(&f, &[1.0; 5]))).unwrap();
    assert_eq!(run_measured(&c, &g).unwrap().verdict, Verdict::Marginal);
    let code = exit_code(
        bin()
            .arg("analyze")
            .arg("--config")
            .arg(data("case_study.cfg"))
            .arg("--out")
            .arg(dir.path().join("out"))
            .arg("--measured")
            .arg(&c)
            .arg(&g),
    );
    assert_eq!(code, 2);
}

#[test]
fn decompose_prints_quaternions() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.csv");
    let m = DqMatrix::new(
        Complex64::new(1.0, 2.0),
        Complex64::new(3.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(5.0, -2.0),
    );
    std::fs::write(&p, format_frd(&MeasuredFrd { rows: vec![FrdRow { f_hz: 50.0, m }] })).unwrap();
    let out = bin().arg("decompose").arg("--frd").arg(&p).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let q = decompose(&m);
    let want: Vec<f64> = std::iter::once(50.0).chain(q.coeffs().iter().flat_map(|c| [c.re, c.im])).collect();
    assert_eq!(row, want);
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, (-300i32..300).prop_map(|e| 10f64.powi(e)), Just(0.0), Just(-0.0)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn frd_text_round_trip_is_exact(vals in prop::collection::vec((1e-3f64..1e3, prop::array::uniform8(finite())), 1..20)) {
        let mut f = 0.0;
        let rows = vals
            .into_iter()
            .map(|(step, v)| {
                f += step;
                let c = |k: usize| Complex64::new(v[k], v[k + 1]);
                FrdRow { f_hz: f, m: DqMatrix::new(c(0), c(2), c(4), c(6)) }
            })
            .collect();
        let d = MeasuredFrd { rows };
        let text = format_frd(&d);
        prop_assert!(text.starts_with(FRD_HEADER));
        let back = parse_frd(&text).unwrap();
        prop_assert_eq!(back.rows.len(), d.rows.len());
        for (a, b) in back.rows.iter().zip(&d.rows) {
            prop_assert_eq!(a.f_hz.to_bits(), b.f_hz.to_bits());
            for (x, y) in [(a.m.dd, b.m.dd), (a.m.dq, b.m.dq), (a.m.qd, b.m.qd), (a.m.qq, b.m.qq)] {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }
}
