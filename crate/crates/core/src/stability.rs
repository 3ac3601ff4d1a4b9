//! Minor-loop stability assessment.
//!
//! The loop is `L = z y` with `z` the grid impedance and `y` the converter
//! admittance seen from the point of common coupling (load convention). The
//! characteristic equation is
//!
//! ```text
//! L_char = det(I + Z Y) = ||1 + z y||^2 = 1 + 2<z, y> + ||z||^2 ||y||^2
//! ```
//!
//! and closed-loop stability follows from its winding around the origin.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freqresp::{make_log_grid, rad_to_hz, refine_around, FrequencyGrid, GridSettings};
use crate::models::{grid_impedance, solve_operating_point, ConverterModel, ConverterParams, GridParams, U1Reference};
use crate::pauli::{dot, PauliQuaternion, QuaternionElement};

/// Steps whose endpoints both exceed this multiple of the median `|L_char|`
/// are treated as crossings of a pole on the imaginary axis.
pub const POLE_CROSSING_FACTOR: f64 = 10.0;

/// Relative distance below which the verdict is reported as marginal.
pub const MARGINAL_FACTOR: f64 = 1e-3;

/// Assumption under which the encirclement count equals the number of
/// closed-loop right-half-plane roots.
pub const RHP_ASSUMPTION: &str =
    "grid impedance and converter admittance are each stable on their own (no open-loop RHP poles); \
     poles on the imaginary axis are indented to the right";

/// Phase step (degrees) above which the analytic sweep subdivides an interval.
pub const PHASE_REFINE_DEG: f64 = 30.0;

/// Decades added at most on each side of the band for the encirclement count.
pub const TAIL_DECADES: usize = 3;

/// `|L_char - 1|` below which a tail decade counts as settled.
pub const TAIL_SETTLED: f64 = 0.5;

const MAX_REFINE_ROUNDS: usize = 16;
const REFINE_SPLIT: usize = 8;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Impedance and admittance quaternions at one angular frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoopPoint {
    pub omega: f64,
    pub z: PauliQuaternion,
    pub y: PauliQuaternion,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinorLoopSample {
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Loop quaternion `z y`.
    pub l: PauliQuaternion,
    /// `det(I + Z Y)`.
    pub l_char: Complex64,
    pub lambda1: Complex64,
    pub lambda2: Complex64,
    /// `10 log10 |L_char|`.
    pub mag_db: f64,
    /// `arg L_char` in degrees.
    pub phase_deg: f64,
}

impl MinorLoopSample {
    pub fn f_hz(&self) -> f64 {
        rad_to_hz(self.omega)
    }
}

/// `1 + 2<z,y> + ||z||^2 ||y||^2`.
pub fn characteristic(z: &PauliQuaternion, y: &PauliQuaternion) -> Complex64 {
    ONE + dot(z, y) * 2.0 + z.semi_norm_sq() * y.semi_norm_sq()
}

/// `||1 + z y||^2`, the second route to the characteristic equation.
pub fn characteristic_via_product(z: &PauliQuaternion, y: &PauliQuaternion) -> Complex64 {
    (PauliQuaternion::ONE + *z * *y).semi_norm_sq()
}

/// Roots of `lambda^2 - 2 L0 lambda + ||L||^2`: `L0 +- sqrt(L1^2 - L2^2 + L3^2)`.
pub fn eigenvalues(l: &PauliQuaternion) -> (Complex64, Complex64) {
    let r = l.vector_semi_norm_sq().sqrt();
    (l.q0 + r, l.q0 - r)
}

pub fn loop_sample(omega: f64, z: &PauliQuaternion, y: &PauliQuaternion) -> MinorLoopSample {
    let l = *z * *y;
    let l_char = characteristic(z, y);
    let (lambda1, lambda2) = eigenvalues(&l);
    MinorLoopSample {
        omega,
        l,
        l_char,
        lambda1,
        lambda2,
        mag_db: 10.0 * libm::log10(l_char.norm()),
        phase_deg: l_char.arg().to_degrees(),
    }
}

pub fn minor_loop(z: &QuaternionElement, y: &QuaternionElement, grid: &FrequencyGrid) -> Result<Vec<MinorLoopSample>> {
    grid.omegas().iter().map(|&w| Ok(loop_sample(w, &z.at_omega(w)?, &y.at_omega(w)?))).collect()
}

/// `Re Y0 - sqrt(Re Y1^2 + Im Y2^2 + Re Y3^2)`.
pub fn passivity_index_sample(y: &PauliQuaternion) -> f64 {
    y.q0.re - libm::sqrt(y.q1.re * y.q1.re + y.q2.im * y.q2.im + y.q3.re * y.q3.re)
}

/// Passivity index per grid frequency, as `(omega, rho_min)`.
pub fn passivity_index(y: &QuaternionElement, grid: &FrequencyGrid) -> Result<Vec<(f64, f64)>> {
    grid.omegas().iter().map(|&w| Ok((w, passivity_index_sample(&y.at_omega(w)?)))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }
}

impl core::fmt::Display for Verdict {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NyquistResult {
    /// Clockwise encirclements of the origin over the full `+-j w` contour.
    pub encirclements: i64,
    pub verdict: Verdict,
    /// Steps classified as crossing a pole on the imaginary axis.
    pub pole_crossings: usize,
}

fn wrap(a: f64) -> f64 {
    // into (-pi, pi]
    let mut r = libm::remainder(a, 2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_distance(trace: &[MinorLoopSample]) -> f64 {
    median(trace.iter().map(|s| s.l_char.norm()).collect())
}

/// Winding of `L_char` around the origin over `[-w_max, w_max]`, built from
/// the positive half by conjugate symmetry.
pub fn nyquist_verdict(trace: &[MinorLoopSample]) -> Result<NyquistResult> {
    if trace.is_empty() {
        return Err(Error::InvalidRange("empty trace"));
    }
    let med = median_distance(trace);
    let big = POLE_CROSSING_FACTOR * med;
    let quarter = PI / 2.0;
    let mut half = 0.0;
    let mut pole_crossings = 0;
    for pair in trace.windows(2) {
        let (a, b) = (pair[0].l_char, pair[1].l_char);
        let d = wrap(b.arg() - a.arg());
        if d.abs() > quarter {
            if a.norm() > big && b.norm() > big {
                pole_crossings += 1;
                half += wrap(d + PI) - PI;
            } else {
                return Err(Error::UnderResolved { omega: pair[1].omega, step_deg: d.to_degrees() });
            }
        } else {
            half += d;
        }
    }
    let first = trace[0].l_char.arg();
    let last = trace[trace.len() - 1].l_char.arg();
    let full = 2.0 * half + wrap(-2.0 * last) + wrap(2.0 * first);
    let encirclements = libm::round(-full / (2.0 * PI)) as i64;
    let (_, min_distance) = critical_frequency(trace)?;
    let verdict = if min_distance < MARGINAL_FACTOR * (1.0 + med) {
        Verdict::Marginal
    } else if encirclements != 0 {
        Verdict::Unstable
    } else {
        Verdict::Stable
    };
    Ok(NyquistResult { encirclements, verdict, pole_crossings })
}

fn argmin(trace: &[MinorLoopSample]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in trace.iter().enumerate() {
        let d = s.l_char.norm();
        if best.is_none_or(|(_, b)| d < b) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

/// Frequency (Hz) of minimum `|L_char|` and that distance; ties go to the
/// lowest frequency.
pub fn critical_frequency(trace: &[MinorLoopSample]) -> Result<(f64, f64)> {
    let i = argmin(trace).ok_or(Error::InvalidRange("empty trace"))?;
    Ok((trace[i].f_hz(), trace[i].l_char.norm()))
}

/// Frequencies (Hz) where `L_char` crosses the negative real axis, by linear
/// interpolation between samples. Passages through a pole on the imaginary
/// axis are not counted.
pub fn phase_crossovers(trace: &[MinorLoopSample]) -> Vec<f64> {
    let big = POLE_CROSSING_FACTOR * median_distance(trace);
    let mut out = Vec::new();
    for pair in trace.windows(2) {
        let (a, b) = (pair[0].l_char, pair[1].l_char);
        if (a.im > 0.0) == (b.im > 0.0) || a.im == b.im {
            continue;
        }
        if a.norm() > big && b.norm() > big {
            continue;
        }
        let t = a.im / (a.im - b.im);
        let re = a.re + t * (b.re - a.re);
        if re < 0.0 {
            let f = pair[0].f_hz() + t * (pair[1].f_hz() - pair[0].f_hz());
            out.push(f);
        }
    }
    out
}

/// `[l0, l1, l2, l3]` with `1 + sum = L_char`.
pub fn contribution_terms(z: &PauliQuaternion, y: &PauliQuaternion) -> [Complex64; 4] {
    let nz = z.semi_norm_sq();
    [
        z.q0 * y.q0 * 2.0 + y.q0 * y.q0 * nz,
        z.q1 * y.q1 * 2.0 - y.q1 * y.q1 * nz,
        -z.q2 * y.q2 * 2.0 + y.q2 * y.q2 * nz,
        z.q3 * y.q3 * 2.0 - y.q3 * y.q3 * nz,
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContributionBreakdown {
    pub omega_c: f64,
    pub ell: [Complex64; 4],
    pub l_at_omega_c: Complex64,
    /// Q0 parts of `-Y_o`, `Y_ff`, `Y_pll`, `Y_cc` (analytic models only).
    pub y0_components: Vec<(&'static str, Complex64)>,
    /// Factor gains of the `G_cc` chain (analytic models only).
    pub ycc0_factors: Vec<(&'static str, Complex64)>,
}

pub fn contributions_at(point: &LoopPoint) -> ContributionBreakdown {
    ContributionBreakdown {
        omega_c: point.omega,
        ell: contribution_terms(&point.z, &point.y),
        l_at_omega_c: characteristic(&point.z, &point.y),
        y0_components: Vec::new(),
        ycc0_factors: Vec::new(),
    }
}

pub fn contributions(z: &QuaternionElement, y: &QuaternionElement, omega_c: f64) -> Result<ContributionBreakdown> {
    Ok(contributions_at(&LoopPoint { omega: omega_c, z: z.at_omega(omega_c)?, y: y.at_omega(omega_c)? }))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankedTerm {
    /// 0..=3 for l0..l3.
    pub index: usize,
    pub magnitude: f64,
    pub phase_deg: f64,
}

/// Non-zero terms by descending magnitude, ties by index.
pub fn rank_root_causes(b: &ContributionBreakdown) -> Vec<RankedTerm> {
    let mut v: Vec<RankedTerm> = b
        .ell
        .iter()
        .enumerate()
        .filter(|(_, l)| l.norm() > 0.0)
        .map(|(index, l)| RankedTerm { index, magnitude: l.norm(), phase_deg: l.arg().to_degrees() })
        .collect();
    v.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.index.cmp(&b.index)));
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityReport {
    pub verdict: Verdict,
    pub encirclements: i64,
    pub pole_crossings: usize,
    pub f_c_hz: f64,
    pub min_distance: f64,
    pub breakdown: ContributionBreakdown,
    pub ranking: Vec<RankedTerm>,
    pub phase_crossovers_hz: Vec<f64>,
    pub trace: Vec<MinorLoopSample>,
    /// `(omega, rho_min)` of the admittance `y` along the trace.
    pub passivity: Vec<(f64, f64)>,
    /// Frequency span (Hz) of the samples used for the encirclement count.
    pub count_band_hz: (f64, f64),
    pub count_points: usize,
    pub assumption: &'static str,
}

fn build_report(
    points: &[LoopPoint],
    ny: NyquistResult,
    count_band_hz: (f64, f64),
    count_points: usize,
) -> Result<StabilityReport> {
    let trace: Vec<MinorLoopSample> = points.iter().map(|p| loop_sample(p.omega, &p.z, &p.y)).collect();
    let i = argmin(&trace).ok_or(Error::InvalidRange("empty trace"))?;
    let breakdown = contributions_at(&points[i]);
    Ok(StabilityReport {
        verdict: ny.verdict,
        encirclements: ny.encirclements,
        pole_crossings: ny.pole_crossings,
        f_c_hz: trace[i].f_hz(),
        min_distance: trace[i].l_char.norm(),
        ranking: rank_root_causes(&breakdown),
        breakdown,
        phase_crossovers_hz: phase_crossovers(&trace),
        passivity: points.iter().map(|p| (p.omega, passivity_index_sample(&p.y))).collect(),
        trace,
        count_band_hz,
        count_points,
        assumption: RHP_ASSUMPTION,
    })
}

/// Assesses a sorted sweep of loop points as given (no extra sampling).
pub fn analyze_points(points: &[LoopPoint]) -> Result<StabilityReport> {
    let trace: Vec<MinorLoopSample> = points.iter().map(|p| loop_sample(p.omega, &p.z, &p.y)).collect();
    let ny = nyquist_verdict(&trace)?;
    let band = (trace[0].f_hz(), trace[trace.len() - 1].f_hz());
    build_report(points, ny, band, points.len())
}

/// The refined grid: the coarse grid plus a linear window around `f_c`.
/// The window is narrowed when it would reach 0 Hz.
pub fn refined_grid(coarse: &FrequencyGrid, f_c: f64, settings: &GridSettings) -> Result<FrequencyGrid> {
    let span = settings.refine_span.min(1.9 * f_c);
    refine_around(coarse, f_c, span, settings.refine_points)
}

fn merge_points(mut a: Vec<LoopPoint>, b: Vec<LoopPoint>) -> Vec<LoopPoint> {
    a.extend(b);
    a.sort_by(|x, y| x.omega.total_cmp(&y.omega));
    a.dedup_by(|x, y| x.omega == y.omega);
    a
}

fn settled(points: &[LoopPoint]) -> bool {
    points.iter().all(|p| (characteristic(&p.z, &p.y) - ONE).norm() < TAIL_SETTLED)
}

/// Extends the sweep by whole decades below and above until `L_char` stays
/// near 1, so that closing the contour through the band edges adds no
/// hidden winding.
fn extend_tails<S>(mut pts: Vec<LoopPoint>, ppd: usize, sweep: &mut S) -> Result<Vec<LoopPoint>>
where
    S: FnMut(&FrequencyGrid) -> Result<Vec<LoopPoint>>,
{
    let lo = rad_to_hz(pts[0].omega);
    let hi = rad_to_hz(pts[pts.len() - 1].omega);
    let head = pts.iter().take_while(|p| rad_to_hz(p.omega) < lo * 10.0).copied().collect::<Vec<_>>();
    let tail = pts.iter().filter(|p| rad_to_hz(p.omega) > hi / 10.0).copied().collect::<Vec<_>>();
    let mut down_ok = settled(&head);
    let mut up_ok = settled(&tail);
    for k in 0..TAIL_DECADES as i32 {
        if !up_ok {
            let (a, b) = (hi * libm::pow(10.0, k as f64), hi * libm::pow(10.0, (k + 1) as f64));
            let g = make_log_grid(a, b, ppd)?;
            let new = sweep(&FrequencyGrid::new(g.omegas()[1..].to_vec())?)?;
            up_ok = settled(&new);
            pts = merge_points(pts, new);
        }
        if !down_ok {
            let (a, b) = (lo * libm::pow(10.0, -(k + 1) as f64), lo * libm::pow(10.0, -k as f64));
            let g = make_log_grid(a, b, ppd)?;
            let om = g.omegas();
            let new = sweep(&FrequencyGrid::new(om[..om.len() - 1].to_vec())?)?;
            down_ok = settled(&new);
            pts = merge_points(pts, new);
        }
    }
    Ok(pts)
}

/// Inserts samples inside every interval whose phase step exceeds
/// [`PHASE_REFINE_DEG`], except clean crossings of an axis pole.
fn resolve_phase<S>(mut pts: Vec<LoopPoint>, sweep: &mut S) -> Result<Vec<LoopPoint>>
where
    S: FnMut(&FrequencyGrid) -> Result<Vec<LoopPoint>>,
{
    for _ in 0..MAX_REFINE_ROUNDS {
        let chars: Vec<Complex64> = pts.iter().map(|p| characteristic(&p.z, &p.y)).collect();
        let big = POLE_CROSSING_FACTOR * median(chars.iter().map(|c| c.norm()).collect());
        let mut extra = Vec::new();
        for i in 0..pts.len() - 1 {
            let (a, b) = (chars[i], chars[i + 1]);
            let step = wrap(b.arg() - a.arg()).abs().to_degrees();
            if step <= PHASE_REFINE_DEG {
                continue;
            }
            if a.norm() > big && b.norm() > big && step > 150.0 {
                continue;
            }
            let (w0, w1) = (pts[i].omega, pts[i + 1].omega);
            if w1 - w0 <= 1e-9 * w1 {
                continue;
            }
            for k in 1..REFINE_SPLIT {
                extra.push(w0 + (w1 - w0) * k as f64 / REFINE_SPLIT as f64);
            }
        }
        if extra.is_empty() {
            break;
        }
        let new = sweep(&FrequencyGrid::new(extra)?)?;
        pts = merge_points(pts, new);
    }
    Ok(pts)
}

/// Coarse sweep, refinement around the coarse minimum, then assessment.
///
/// The encirclement count runs on an extended copy of the trace: tails are
/// added outside the band until the characteristic equation settles, and
/// fast phase steps are subdivided. The reported trace, critical frequency
/// and breakdown stay within the requested band. `sweep` must return
/// points in grid order.
pub fn analyze_with<S>(settings: &GridSettings, mut sweep: S) -> Result<StabilityReport>
where
    S: FnMut(&FrequencyGrid) -> Result<Vec<LoopPoint>>,
{
    settings.validate()?;
    let coarse = settings.coarse_grid()?;
    let pts = sweep(&coarse)?;
    let trace: Vec<MinorLoopSample> = pts.iter().map(|p| loop_sample(p.omega, &p.z, &p.y)).collect();
    let (f0, _) = critical_frequency(&trace)?;
    let fine = refined_grid(&coarse, f0, settings)?;
    let (w_lo, w_hi) = (fine.omegas()[0], fine.omegas()[fine.len() - 1]);
    let band_pts = sweep(&fine)?;
    let ext = extend_tails(band_pts, settings.points_per_decade, &mut sweep)?;
    let ext = resolve_phase(ext, &mut sweep)?;
    let ext_trace: Vec<MinorLoopSample> = ext.iter().map(|p| loop_sample(p.omega, &p.z, &p.y)).collect();
    let ny = nyquist_verdict(&ext_trace)?;
    let band: Vec<LoopPoint> = ext.iter().filter(|p| p.omega >= w_lo && p.omega <= w_hi).copied().collect();
    let count_band = (ext_trace[0].f_hz(), ext_trace[ext_trace.len() - 1].f_hz());
    build_report(&band, ny, count_band, ext.len())
}

/// Table-style analytic case: converter model plus grid impedance.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticCase {
    pub model: ConverterModel,
    pub zg: QuaternionElement,
}

impl AnalyticCase {
    pub fn new(p: &ConverterParams, g: &GridParams, mode: U1Reference) -> Result<Self> {
        p.validate()?;
        g.validate()?;
        let op = solve_operating_point(p, g, mode)?;
        Ok(AnalyticCase { model: ConverterModel::new(*p, op), zg: grid_impedance(g, p.omega1) })
    }

    /// Grid impedance and load-convention converter admittance `-Y_c`.
    pub fn point(&self, omega: f64) -> Result<LoopPoint> {
        let z = self.zg.at_omega(omega)?;
        let y = -self.model.sample_at_omega(omega)?.y_total;
        Ok(LoopPoint { omega, z, y })
    }

    pub fn sweep(&self, grid: &FrequencyGrid) -> Result<Vec<LoopPoint>> {
        grid.omegas().iter().map(|&w| self.point(w)).collect()
    }

    /// Fills the component breakdowns of a report at its critical frequency.
    pub fn annotate(&self, report: &mut StabilityReport) -> Result<()> {
        let w = report.breakdown.omega_c;
        let s = self.model.sample_at_omega(w)?;
        report.breakdown.y0_components =
            alloc::vec![("-Y_o", -s.y_o.q0), ("Y_ff", s.y_ff.q0), ("Y_pll", s.y_pll.q0), ("Y_cc", s.y_cc.q0)];
        report.breakdown.ycc0_factors =
            self.model.cc_path_factors(Complex64::new(0.0, w)).map_err(|e| e.at(w))?.to_vec();
        Ok(())
    }

    pub fn analyze(&self, settings: &GridSettings) -> Result<StabilityReport> {
        let mut r = analyze_with(settings, |g| self.sweep(g))?;
        self.annotate(&mut r)?;
        Ok(r)
    }
}
