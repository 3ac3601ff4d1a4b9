//! Small-signal dq models of a grid-following converter and a weak grid.
//!
//! The converter admittance is
//!
//! ```text
//! Y_c = (Z_f + Z_cc)^-1 (-I + G_ff + G_pll + G_cc) = -Y_o + Y_ff + Y_pll + Y_cc
//! ```
//!
//! in generator convention (current injected into the grid per volt at the
//! point of common coupling). All blocks are built as [`QuaternionElement`]s
//! and sampled pointwise.

use alloc::vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freqresp::TransferElement;
use crate::pauli::{frequency_shift, im_operator, PauliQuaternion, QuaternionElement};

/// Bandwidth (Hz) the reference PLL gains are tuned for.
pub const PLL_REFERENCE_BANDWIDTH_HZ: f64 = 330.0;

const J_UNIT: Complex64 = Complex64::new(0.0, 1.0);

/// Converter hardware and control parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConverterParams {
    /// Grid voltage amplitude (V).
    pub v1: f64,
    /// Fundamental angular frequency (rad/s).
    pub omega1: f64,
    /// Filter inductance (H).
    pub l: f64,
    /// Filter resistance (ohm).
    pub r: f64,
    /// Lumped control and PWM delay (s).
    pub td: f64,
    pub kp_cc: f64,
    pub ki_cc: f64,
    pub kp_pll: f64,
    pub ki_pll: f64,
    /// Steady-state current reference, d axis (A).
    pub i1_d: f64,
    /// Steady-state current reference, q axis (A).
    pub i1_q: f64,
}

impl ConverterParams {
    /// The 50 Hz, 326 V test case with the 330 Hz PLL.
    pub fn case_study() -> Self {
        ConverterParams {
            v1: 326.0,
            omega1: 2.0 * core::f64::consts::PI * 50.0,
            l: 3e-3,
            r: 0.0,
            td: 150e-6,
            kp_cc: 16.0,
            ki_cc: 600.0,
            kp_pll: 18.07,
            ki_pll: 27708.0,
            i1_d: 15.0,
            i1_q: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v1,
            self.omega1,
            self.l,
            self.r,
            self.td,
            self.kp_cc,
            self.ki_cc,
            self.kp_pll,
            self.ki_pll,
            self.i1_d,
            self.i1_q,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidRange("converter parameters must be finite"));
        }
        if !(self.l > 0.0) {
            return Err(Error::InvalidRange("L must be positive"));
        }
        if self.td < 0.0 {
            return Err(Error::InvalidRange("Td must be non-negative"));
        }
        if !(self.v1 > 0.0) {
            return Err(Error::InvalidRange("V1 must be positive"));
        }
        if !(self.omega1 > 0.0) {
            return Err(Error::InvalidRange("omega1 must be positive"));
        }
        Ok(())
    }
}

/// Grid impedance: `R_g + s L_g` in parallel with the shunt capacitor `C_g`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    pub lg: f64,
    pub cg: f64,
    pub rg: f64,
}

impl GridParams {
    pub fn case_study() -> Self {
        GridParams { lg: 5e-3, cg: 20e-6, rg: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.lg, self.cg, self.rg].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidRange("grid parameters must be finite"));
        }
        if !(self.lg > 0.0) {
            return Err(Error::InvalidRange("Lg must be positive"));
        }
        if !(self.cg > 0.0) {
            return Err(Error::InvalidRange("Cg must be positive"));
        }
        if self.rg < 0.0 {
            return Err(Error::InvalidRange("Rg must be non-negative"));
        }
        Ok(())
    }
}

/// Steady state in the PLL-aligned frame (`vc_q = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatingPoint {
    pub u1_d: f64,
    pub u1_q: f64,
    pub vc_d: f64,
    pub vc_q: f64,
    pub i1_d: f64,
    pub i1_q: f64,
}

impl OperatingPoint {
    pub fn u1(&self) -> Complex64 {
        Complex64::new(self.u1_d, self.u1_q)
    }

    pub fn i1(&self) -> Complex64 {
        Complex64::new(self.i1_d, self.i1_q)
    }
}

/// Which steady-state voltage multiplies the PLL angle perturbation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum U1Reference {
    /// Voltage produced by the current controller, `(R + j w1 L) I1`.
    /// The PCC feed-forward cancels the `Vc` part of the frame rotation.
    #[default]
    Controller,
    /// Full converter terminal voltage, `Vc + (R + j w1 L) I1`.
    Terminal,
}

/// `(R + sL) I + J w1 L`.
pub fn filter_impedance(p: &ConverterParams) -> QuaternionElement {
    frequency_shift(TransferElement::series_rl(p.r, p.l), p.omega1)
}

/// `e^{-J w1 Td} e^{-s Td}`.
pub fn delay_model(p: &ConverterParams) -> QuaternionElement {
    if p.td == 0.0 {
        return QuaternionElement::constant(PauliQuaternion::ONE);
    }
    let d = TransferElement::rational_with_delay(vec![1.0], vec![1.0], p.td).expect("validated delay");
    frequency_shift(d, p.omega1)
}

/// PI current controller `Kp + Ki/s`.
pub fn cc_tf(p: &ConverterParams) -> TransferElement {
    TransferElement::pi(p.kp_cc, p.ki_cc)
}

/// `D(s) [CC(s) I - J w1 L]`.
pub fn cc_impedance(p: &ConverterParams) -> QuaternionElement {
    let inner =
        QuaternionElement::components([Some(cc_tf(p)), None, Some(TransferElement::constant(-p.omega1 * p.l)), None]);
    delay_model(p) * inner
}

/// Linearized SRF-PLL: `(Kp s + Ki) / (s^2 + V1 Kp s + V1 Ki)`.
pub fn pll_tf(p: &ConverterParams) -> TransferElement {
    TransferElement::rational(vec![p.kp_pll, p.ki_pll], vec![1.0, p.v1 * p.kp_pll, p.v1 * p.ki_pll])
        .expect("monic denominator")
}

/// `d + j q` as the quaternion `(d, 0, q, 0)`.
pub fn phasor_quaternion(d: f64, q: f64) -> PauliQuaternion {
    PauliQuaternion::real(d, 0.0, q, 0.0)
}

fn pll_angle_path(p: &ConverterParams) -> QuaternionElement {
    QuaternionElement::j_scaled(pll_tf(p)) * QuaternionElement::constant(im_operator())
}

/// `G_pll = D U1 J PLL Im`.
pub fn pll_admittance_path(p: &ConverterParams, op: &OperatingPoint) -> QuaternionElement {
    delay_model(p) * QuaternionElement::constant(phasor_quaternion(op.u1_d, op.u1_q)) * pll_angle_path(p)
}

/// `G_cc = D CC I1 J PLL Im`.
pub fn cc_pll_cross_path(p: &ConverterParams, op: &OperatingPoint) -> QuaternionElement {
    delay_model(p)
        * QuaternionElement::scalar(cc_tf(p))
        * QuaternionElement::constant(phasor_quaternion(op.i1_d, op.i1_q))
        * pll_angle_path(p)
}

/// `G_ff = D`.
pub fn feedforward_path(p: &ConverterParams) -> QuaternionElement {
    delay_model(p)
}

/// Admittance blocks of the converter.
#[derive(Clone, Debug, PartialEq)]
pub struct ConverterAdmittance {
    pub y_total: QuaternionElement,
    pub y_o: QuaternionElement,
    pub y_ff: QuaternionElement,
    pub y_pll: QuaternionElement,
    pub y_cc: QuaternionElement,
}

/// One-frequency sample of every admittance block.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmittanceSample {
    pub y_total: PauliQuaternion,
    pub y_o: PauliQuaternion,
    pub y_ff: PauliQuaternion,
    pub y_pll: PauliQuaternion,
    pub y_cc: PauliQuaternion,
}

pub fn converter_admittance(p: &ConverterParams, op: &OperatingPoint) -> ConverterAdmittance {
    let y_o = (filter_impedance(p) + cc_impedance(p)).inverse();
    let y_ff = y_o.clone() * feedforward_path(p);
    let y_pll = y_o.clone() * pll_admittance_path(p, op);
    let y_cc = y_o.clone() * cc_pll_cross_path(p, op);
    let y_total = -y_o.clone() + y_ff.clone() + y_pll.clone() + y_cc.clone();
    ConverterAdmittance { y_total, y_o, y_ff, y_pll, y_cc }
}

/// Converter model with its blocks prebuilt for repeated sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConverterModel {
    pub params: ConverterParams,
    pub op: OperatingPoint,
    z_sum: QuaternionElement,
    g_ff: QuaternionElement,
    g_pll: QuaternionElement,
    g_cc: QuaternionElement,
}

impl ConverterModel {
    pub fn new(params: ConverterParams, op: OperatingPoint) -> Self {
        ConverterModel {
            z_sum: filter_impedance(&params) + cc_impedance(&params),
            g_ff: feedforward_path(&params),
            g_pll: pll_admittance_path(&params, &op),
            g_cc: cc_pll_cross_path(&params, &op),
            params,
            op,
        }
    }

    /// Evaluates every block at `s`, inverting `Z_f + Z_cc` once.
    pub fn sample(&self, s: Complex64) -> Result<AdmittanceSample> {
        let y_o = self.z_sum.evaluate(s)?.inverse()?;
        let y_ff = y_o * self.g_ff.evaluate(s)?;
        let y_pll = y_o * self.g_pll.evaluate(s)?;
        let y_cc = y_o * self.g_cc.evaluate(s)?;
        Ok(AdmittanceSample { y_total: -y_o + y_ff + y_pll + y_cc, y_o, y_ff, y_pll, y_cc })
    }

    pub fn sample_at_omega(&self, omega: f64) -> Result<AdmittanceSample> {
        self.sample(Complex64::new(0.0, omega)).map_err(|e| e.at(omega))
    }

    /// Complex gains of the factors in the `G_cc` chain at `s`:
    /// `D`, `CC`, `I1`, `PLL` and the gain of `J Im` (each as a
    /// positive-sequence CTF where a quaternion is involved).
    pub fn cc_path_factors(&self, s: Complex64) -> Result<[(&'static str, Complex64); 5]> {
        let p = &self.params;
        let d = delay_model(p).evaluate(s)?.ctf_positive();
        let cc = cc_tf(p).evaluate(s)?;
        let pll = pll_tf(p).evaluate(s)?;
        let j_im = (PauliQuaternion::J * im_operator()).ctf_positive();
        Ok([("D", d), ("CC", cc), ("I1", self.op.i1()), ("PLL", pll), ("Im-path gain", j_im)])
    }
}

/// `[(R_g + s L_g)^-1 + s C_g]^-1` shifted to the dq frame.
pub fn grid_impedance(g: &GridParams, omega1: f64) -> QuaternionElement {
    let h =
        TransferElement::rational(vec![g.lg, g.rg], vec![g.lg * g.cg, g.rg * g.cg, 1.0]).expect("nonzero denominator");
    frequency_shift(h, omega1)
}

/// Solves the fundamental-frequency phasor circuit for the PCC voltage and
/// the converter voltage in the PLL frame.
///
/// KCL at the PCC: `(Vg - Vc)/(R_g + j w1 L_g) + I1 = j w1 C_g Vc` with
/// `|Vg| = V1`. With `Vc` real the magnitude condition is a quadratic; the
/// larger positive root (the normal operating branch) is taken.
pub fn solve_operating_point(p: &ConverterParams, g: &GridParams, mode: U1Reference) -> Result<OperatingPoint> {
    let w1 = p.omega1;
    let zl = Complex64::new(g.rg, w1 * g.lg);
    let i1 = Complex64::new(p.i1_d, p.i1_q);
    let a = Complex64::new(1.0, 0.0) + J_UNIT * w1 * g.cg * zl;
    let b = i1 * zl;
    let qa = a.norm_sqr();
    if !(qa > 1e-24) {
        return Err(Error::Unsolvable);
    }
    let qb = -2.0 * (a.conj() * b).re;
    let qc = b.norm_sqr() - p.v1 * p.v1;
    let disc = qb * qb - 4.0 * qa * qc;
    if !(disc >= 0.0) {
        return Err(Error::Unsolvable);
    }
    let vc = (-qb + libm::sqrt(disc)) / (2.0 * qa);
    if !(vc > 0.0) || !vc.is_finite() {
        return Err(Error::Unsolvable);
    }
    let drop = Complex64::new(p.r, w1 * p.l) * i1;
    let u1 = match mode {
        U1Reference::Controller => drop,
        U1Reference::Terminal => drop + vc,
    };
    Ok(OperatingPoint { u1_d: u1.re, u1_q: u1.im, vc_d: vc, vc_q: 0.0, i1_d: p.i1_d, i1_q: p.i1_q })
}

/// Scales the PLL gains to a new bandwidth keeping the damping ratio:
/// `Kp * (f/f_ref)`, `Ki * (f/f_ref)^2`.
pub fn retune_pll_bandwidth(p: &ConverterParams, f_bw: f64) -> Result<ConverterParams> {
    if !(f_bw > 0.0) || !f_bw.is_finite() {
        return Err(Error::InvalidRange("PLL bandwidth must be positive"));
    }
    let k = f_bw / PLL_REFERENCE_BANDWIDTH_HZ;
    Ok(ConverterParams { kp_pll: p.kp_pll * k, ki_pll: p.ki_pll * k * k, ..*p })
}

/// Damping ratio of `s^2 + V1 Kp s + V1 Ki`.
pub fn pll_damping(p: &ConverterParams) -> f64 {
    p.v1 * p.kp_pll / (2.0 * libm::sqrt(p.v1 * p.ki_pll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    fn case_op() -> OperatingPoint {
        let p = ConverterParams::case_study();
        solve_operating_point(&p, &GridParams::case_study(), U1Reference::Controller).unwrap()
    }

    #[test]
    fn filter_impedance_values() {
        let p = ConverterParams::case_study();
        let q = filter_impedance(&p).evaluate(c(0.0, 0.0)).unwrap();
        assert!(q.q0.norm() < 1e-15);
        assert!((q.q2.re - 0.9425).abs() < 1e-4);
        let s = c(0.0, 2.0 * PI * 250.0);
        let direct = frequency_shift(TransferElement::series_rl(0.0, 3e-3), p.omega1).evaluate(s).unwrap();
        assert_eq!(filter_impedance(&p).evaluate(s).unwrap(), direct);
    }

    #[test]
    fn delay_model_values() {
        let mut p = ConverterParams::case_study();
        assert!((libm::cos(p.omega1 * p.td) - 0.99889).abs() < 1e-5);
        for f in [10.0, 325.0, 1700.0] {
            let q = delay_model(&p).at_omega(2.0 * PI * f).unwrap();
            assert!((q.magnitude_sq() - 1.0).abs() < 1e-12);
        }
        p.td = 0.0;
        assert_eq!(delay_model(&p).evaluate(c(0.0, 5.0)).unwrap(), PauliQuaternion::ONE);
    }

    #[test]
    fn cc_impedance_values() {
        let p = ConverterParams::case_study();
        let s = c(0.0, 2.0 * PI * 325.0);
        let cc = cc_tf(&p).evaluate(s).unwrap();
        assert!(close(cc, c(16.0, -0.2939), 1e-4));
        let mut p0 = p;
        p0.td = 0.0;
        p0.omega1 = 1e-9;
        let q = cc_impedance(&p0).evaluate(s).unwrap();
        assert!(close(q.q0, cc, 1e-12));
        assert!(q.q2.norm() < 1e-9);
        assert!(matches!(cc_impedance(&p).evaluate(c(0.0, 0.0)), Err(Error::PoleHit { .. })));
    }

    #[test]
    fn pll_limits() {
        let p = ConverterParams::case_study();
        let dc = pll_tf(&p).evaluate(c(1e-9, 0.0)).unwrap();
        assert!(close(dc, c(1.0 / p.v1, 0.0), 1e-9));
        assert!(pll_tf(&p).evaluate(c(0.0, 1e12)).unwrap().norm() < 1e-9);
    }

    #[test]
    fn zero_paths() {
        let mut p = ConverterParams::case_study();
        p.kp_pll = 0.0;
        p.ki_pll = 0.0;
        let op = case_op();
        let s = c(0.0, 900.0);
        assert_eq!(pll_admittance_path(&p, &op).evaluate(s).unwrap(), PauliQuaternion::ZERO);
        let p = ConverterParams::case_study();
        let op0 = OperatingPoint { i1_d: 0.0, i1_q: 0.0, ..op };
        let g = cc_pll_cross_path(&p, &op0).evaluate(s).unwrap();
        assert!(g.max_abs() == 0.0);
    }

    #[test]
    fn pll_path_only_reads_q_input() {
        let p = ConverterParams::case_study();
        let op = case_op();
        let m = crate::pauli::recompose(&pll_admittance_path(&p, &op).evaluate(c(0.0, 1500.0)).unwrap());
        assert!(m.dd.norm() < 1e-15 && m.qd.norm() < 1e-15);
        assert!(m.dq.norm() > 0.0);
    }

    #[test]
    fn sum_identity() {
        let p = ConverterParams::case_study();
        let op = case_op();
        let y = converter_admittance(&p, &op);
        let g_sum = QuaternionElement::constant(-PauliQuaternion::ONE)
            + feedforward_path(&p)
            + pll_admittance_path(&p, &op)
            + cc_pll_cross_path(&p, &op);
        let alt = (filter_impedance(&p) + cc_impedance(&p)).inverse() * g_sum;
        let model = ConverterModel::new(p, op);
        for f in [12.0, 120.0, 325.0, 777.0, 1900.0] {
            let w = 2.0 * PI * f;
            let a = y.y_total.at_omega(w).unwrap();
            let b = alt.at_omega(w).unwrap();
            let s = model.sample_at_omega(w).unwrap();
            for k in 0..4 {
                assert!(close(a.coeffs()[k], b.coeffs()[k], 1e-10));
                assert!(close(a.coeffs()[k], s.y_total.coeffs()[k], 1e-12));
            }
        }
    }

    #[test]
    fn control_paths_off_gives_minus_yo() {
        let mut p = ConverterParams::case_study();
        p.kp_pll = 0.0;
        p.ki_pll = 0.0;
        let op = OperatingPoint { i1_d: 0.0, i1_q: 0.0, ..case_op() };
        let y = converter_admittance(&p, &op);
        // G_ff remains; remove it by comparing against -Y_o + Y_ff
        let s = c(0.0, 2000.0);
        let t = y.y_total.evaluate(s).unwrap();
        let want = -y.y_o.evaluate(s).unwrap() + y.y_ff.evaluate(s).unwrap();
        for k in 0..4 {
            assert!(close(t.coeffs()[k], want.coeffs()[k], 1e-12));
        }
    }

    #[test]
    fn symmetric_cc_is_mfd_and_pll_breaks_it() {
        let p = ConverterParams::case_study();
        let op = case_op();
        let s = c(0.0, 2.0 * PI * 300.0);
        let y = converter_admittance(&p, &op);
        assert!(y.y_o.evaluate(s).unwrap().is_mfd(1e-12));
        assert!(!y.y_total.evaluate(s).unwrap().is_mfd(1e-6));
    }

    #[test]
    fn grid_impedance_shape() {
        let g = GridParams::case_study();
        let w1 = 2.0 * PI * 50.0;
        let q = grid_impedance(&g, w1).at_omega(2.0 * PI * 700.0).unwrap();
        assert!(q.is_mfd(0.0));
        // resonance of Lg || Cg
        let f0 = 1.0 / (2.0 * PI * libm::sqrt(g.lg * g.cg));
        assert!((f0 - 503.3).abs() < 0.1);
        // Cg -> 0 recovers the shifted inductor
        let g0 = GridParams { cg: 1e-15, ..g };
        let q0 = grid_impedance(&g0, w1).at_omega(900.0).unwrap();
        assert!(close(q0.q0, c(0.0, 900.0 * g.lg), 1e-9));
        assert!(close(q0.q2, c(w1 * g.lg, 0.0), 1e-9));
    }

    #[test]
    fn operating_point_cases() {
        let p = ConverterParams::case_study();
        let g_stiff = GridParams { lg: 0.0, cg: 0.0, rg: 0.0 };
        let op = solve_operating_point(&p, &g_stiff, U1Reference::Terminal).unwrap();
        assert!((op.vc_d - p.v1).abs() < 1e-9);
        assert!((op.u1_d - p.v1).abs() < 1e-9);
        assert!((op.u1_q - p.omega1 * p.l * p.i1_d).abs() < 1e-9);
        let p0 = ConverterParams { i1_d: 0.0, ..p };
        let op0 = solve_operating_point(&p0, &g_stiff, U1Reference::Terminal).unwrap();
        assert_eq!((op0.u1_d, op0.u1_q), (p.v1, 0.0));
        let op = solve_operating_point(&p, &GridParams::case_study(), U1Reference::Controller).unwrap();
        assert_eq!(op.u1_d, 0.0);
        assert!((op.u1_q - 14.137).abs() < 1e-3);
        assert_eq!(op.vc_q, 0.0);
    }

    #[test]
    fn operating_point_satisfies_kcl() {
        let p = ConverterParams::case_study();
        let g = GridParams { rg: 0.3, ..GridParams::case_study() };
        let op = solve_operating_point(&p, &g, U1Reference::Terminal).unwrap();
        let vc = c(op.vc_d, 0.0);
        let zl = c(g.rg, p.omega1 * g.lg);
        let vg = vc + zl * (J_UNIT * p.omega1 * g.cg * vc - op.i1());
        assert!((vg.norm() - p.v1).abs() < 1e-9);
    }

    #[test]
    fn operating_point_unsolvable() {
        let p = ConverterParams { i1_d: 1e5, ..ConverterParams::case_study() };
        assert_eq!(
            solve_operating_point(&p, &GridParams::case_study(), U1Reference::Controller),
            Err(Error::Unsolvable)
        );
    }

    #[test]
    fn retune_rule() {
        let p = ConverterParams::case_study();
        assert_eq!(retune_pll_bandwidth(&p, 330.0).unwrap(), p);
        let q = retune_pll_bandwidth(&p, 20.0).unwrap();
        assert!((q.kp_pll - 1.095).abs() < 1e-3);
        assert!((q.ki_pll - 101.8).abs() < 0.1);
        assert!((pll_damping(&p) - pll_damping(&q)).abs() < 1e-12);
        assert!(retune_pll_bandwidth(&p, 0.0).is_err());
    }

    #[test]
    fn cc_factors_compose_to_path() {
        let p = ConverterParams::case_study();
        let op = case_op();
        let m = ConverterModel::new(p, op);
        let s = c(0.0, 2.0 * PI * 325.0);
        let f = m.cc_path_factors(s).unwrap();
        assert_eq!(f[4].1, c(0.5, 0.0));
        assert_eq!(f[2].1, c(15.0, 0.0));
    }

    #[test]
    fn params_validation() {
        assert!(ConverterParams::case_study().validate().is_ok());
        assert!(ConverterParams { l: -1.0, ..ConverterParams::case_study() }.validate().is_err());
        assert!(GridParams { cg: 0.0, ..GridParams::case_study() }.validate().is_err());
    }
}
