//! Logarithmic Nyquist plot of `L_char`, written as plain SVG.
//!
//! A point `L` is drawn at angle `arg L` and at a radius that grows linearly
//! with `10 log10 |L|` above a floor chosen from the trace. The origin,
//! which is the critical point of the characteristic equation, sits at the
//! centre of the plot.

use std::fmt::Write as _;

use num_complex::Complex64;
use paulistab_core::stability::{MinorLoopSample, StabilityReport};

const SIZE: f64 = 640.0;
const CENTER: f64 = SIZE / 2.0;
const RADIUS: f64 = 280.0;
const RING_DB: f64 = 10.0;

const ARROW_COLORS: [&str; 4] = ["#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

#[derive(Clone, Copy, Debug)]
pub struct LogPolar {
    pub lo_db: f64,
    pub hi_db: f64,
}

impl LogPolar {
    /// Chooses ring-aligned limits that bracket every magnitude in `db`.
    pub fn fit(db: impl IntoIterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for d in db.into_iter().filter(|d| d.is_finite()) {
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if !lo.is_finite() {
            return LogPolar { lo_db: -20.0, hi_db: 20.0 };
        }
        let lo_db = (lo / RING_DB).floor() * RING_DB - RING_DB;
        let hi_db = ((hi / RING_DB).ceil() * RING_DB).max(lo_db + RING_DB);
        LogPolar { lo_db, hi_db }
    }

    pub fn radius(&self, db: f64) -> f64 {
        let t = (db - self.lo_db) / (self.hi_db - self.lo_db);
        RADIUS * t.clamp(0.0, 1.0)
    }

    /// Screen coordinates; y grows downward.
    pub fn project(&self, l: Complex64) -> (f64, f64) {
        let r = if l.norm_sqr() > 0.0 { self.radius(10.0 * l.norm().log10()) } else { 0.0 };
        let a = l.arg();
        (CENTER + r * a.cos(), CENTER - r * a.sin())
    }
}

fn polyline(out: &mut String, pts: &[(f64, f64)], attrs: &str) {
    out.push_str("<polyline fill=\"none\" ");
    out.push_str(attrs);
    out.push_str(" points=\"");
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{x:.2},{y:.2}").unwrap();
    }
    out.push_str("\"/>\n");
}

fn segments(trace: &[MinorLoopSample]) -> Vec<&[MinorLoopSample]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..trace.len() {
        let d = (trace[i].l_char / trace[i - 1].l_char).arg();
        if d.abs() > std::f64::consts::FRAC_PI_2 {
            out.push(&trace[start..i]);
            start = i;
        }
    }
    out.push(&trace[start..]);
    out
}

pub fn nyquist_svg(r: &StabilityReport) -> String {
    let map = LogPolar::fit(r.trace.iter().map(|s| s.mag_db));
    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\" font-family=\"sans-serif\" font-size=\"11\">"
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let mut db = map.lo_db + RING_DB;
    while db <= map.hi_db + 1e-9 {
        let rr = map.radius(db);
        writeln!(out, "<circle cx=\"{CENTER}\" cy=\"{CENTER}\" r=\"{rr:.2}\" fill=\"none\" stroke=\"#ccc\"/>").unwrap();
        writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" fill=\"#888\">{db:.0} dB</text>", CENTER + rr + 2.0, CENTER - 2.0)
            .unwrap();
        db += RING_DB;
    }
    writeln!(
        out,
        "<line x1=\"{}\" y1=\"{CENTER}\" x2=\"{}\" y2=\"{CENTER}\" stroke=\"#ccc\"/>",
        CENTER - RADIUS,
        CENTER + RADIUS
    )
    .unwrap();
    writeln!(
        out,
        "<line x1=\"{CENTER}\" y1=\"{}\" x2=\"{CENTER}\" y2=\"{}\" stroke=\"#ccc\"/>",
        CENTER - RADIUS,
        CENTER + RADIUS
    )
    .unwrap();

    // Positive frequencies, then the mirrored negative half. The trace is
    // cut where it jumps through a pole so no chord crosses the centre.
    for seg in segments(&r.trace) {
        let pos: Vec<_> = seg.iter().map(|s| map.project(s.l_char)).collect();
        let neg: Vec<_> = seg.iter().map(|s| map.project(s.l_char.conj())).collect();
        polyline(&mut out, &pos, "stroke=\"#1f77b4\" stroke-width=\"1.5\"");
        polyline(&mut out, &neg, "stroke=\"#1f77b4\" stroke-width=\"1\" stroke-dasharray=\"4 3\"");
    }

    writeln!(out, "<circle cx=\"{CENTER}\" cy=\"{CENTER}\" r=\"4\" fill=\"black\"/>").unwrap();
    writeln!(out, "<text x=\"{}\" y=\"{}\">(0, j0)</text>", CENTER + 6.0, CENTER + 14.0).unwrap();

    let b = &r.breakdown;
    let mut from = Complex64::new(1.0, 0.0);
    for (i, l) in b.ell.iter().enumerate() {
        let to = from + l;
        let (x1, y1) = map.project(from);
        let (x2, y2) = map.project(to);
        writeln!(
            out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{}\" stroke-width=\"2\"/>",
            ARROW_COLORS[i]
        )
        .unwrap();
        writeln!(out, "<circle cx=\"{x2:.2}\" cy=\"{y2:.2}\" r=\"2.5\" fill=\"{}\"/>", ARROW_COLORS[i]).unwrap();
        writeln!(out, "<text x=\"12\" y=\"{}\" fill=\"{}\">l{i}</text>", 36 + 14 * i, ARROW_COLORS[i]).unwrap();
        from = to;
    }
    let (xc, yc) = map.project(b.l_at_omega_c);
    writeln!(out, "<circle cx=\"{xc:.2}\" cy=\"{yc:.2}\" r=\"4\" fill=\"none\" stroke=\"black\"/>").unwrap();
    writeln!(
        out,
        "<text x=\"12\" y=\"20\">{} ({} encirclements), f_c = {:.1} Hz</text>",
        r.verdict, r.encirclements, r.f_c_hz
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}
