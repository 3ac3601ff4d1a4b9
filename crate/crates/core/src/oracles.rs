//! Independent validators.
//!
//! Everything here is computed without the quaternion machinery: plain 2x2
//! complex matrix algebra for per-frequency checks, and a time-domain
//! state-space model (Padé delay) whose eigenvalues decide closed-loop
//! stability directly.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freqresp::TransferElement;
use crate::models::{solve_operating_point, ConverterParams, GridParams, OperatingPoint, U1Reference};
use crate::pauli::DqMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn matrix_det2(m: &DqMatrix) -> Complex64 {
    m.dd * m.qq - m.dq * m.qd
}

pub fn matrix_trace2(m: &DqMatrix) -> Complex64 {
    m.dd + m.qq
}

/// Roots of `lambda^2 - tr lambda + det`, the larger-magnitude root first,
/// the other from `det / lambda1` to avoid cancellation.
pub fn matrix_eig2(m: &DqMatrix) -> (Complex64, Complex64) {
    let tr = matrix_trace2(m);
    let det = matrix_det2(m);
    let disc = (tr * tr - det * 4.0).sqrt();
    let (a, b) = (tr + disc, tr - disc);
    let big = if a.norm() >= b.norm() { a } else { b };
    if big.norm() == 0.0 {
        return (ZERO, ZERO);
    }
    let l1 = big * 0.5;
    (l1, det / l1)
}

pub fn matrix_mul2(a: &DqMatrix, b: &DqMatrix) -> DqMatrix {
    DqMatrix::new(
        a.dd * b.dd + a.dq * b.qd,
        a.dd * b.dq + a.dq * b.qq,
        a.qd * b.dd + a.qq * b.qd,
        a.qd * b.dq + a.qq * b.qq,
    )
}

pub fn matrix_add2(a: &DqMatrix, b: &DqMatrix) -> DqMatrix {
    DqMatrix::new(a.dd + b.dd, a.dq + b.dq, a.qd + b.qd, a.qq + b.qq)
}

pub fn matrix_scale2(c: Complex64, a: &DqMatrix) -> DqMatrix {
    DqMatrix::new(c * a.dd, c * a.dq, c * a.qd, c * a.qq)
}

/// Inverse by the adjugate; fails when `|det|` is below `1e-14` times the
/// largest squared entry magnitude.
pub fn matrix_inv2(m: &DqMatrix) -> Result<DqMatrix> {
    let det = matrix_det2(m);
    let scale = [m.dd, m.dq, m.qd, m.qq].iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    if !(det.norm() > 1e-14 * scale) {
        return Err(Error::Singular);
    }
    let k = det.inv();
    Ok(DqMatrix::new(m.qq * k, -m.dq * k, -m.qd * k, m.dd * k))
}

fn diag(c: Complex64) -> DqMatrix {
    DqMatrix::new(c, ZERO, ZERO, c)
}

/// `[[d, -q], [q, d]]`, the matrix of the phasor `d + j q`.
pub fn phasor_matrix(d: f64, q: f64) -> DqMatrix {
    DqMatrix::new(Complex64::new(d, 0.0), Complex64::new(-q, 0.0), Complex64::new(q, 0.0), Complex64::new(d, 0.0))
}

pub fn j_matrix() -> DqMatrix {
    phasor_matrix(0.0, 1.0)
}

/// Selects the q input onto the d output.
pub fn im_matrix() -> DqMatrix {
    DqMatrix::new(ZERO, ONE, ZERO, ZERO)
}

/// Polynomial (descending coefficients) of the matrix `A`, by Horner.
fn matrix_poly(coeffs: &[f64], a: &DqMatrix) -> DqMatrix {
    coeffs.iter().fold(diag(ZERO), |acc, &c| matrix_add2(&matrix_mul2(&acc, a), &diag(Complex64::new(c, 0.0))))
}

/// `h(s I + J w1)` for a rational `h = num/den`, as the matrix function
/// `num(A) den(A)^-1`.
pub fn matrix_shift(num: &[f64], den: &[f64], omega1: f64, s: Complex64) -> Result<DqMatrix> {
    let a = matrix_add2(&diag(s), &matrix_scale2(Complex64::new(omega1, 0.0), &j_matrix()));
    Ok(matrix_mul2(&matrix_poly(num, &a), &matrix_inv2(&matrix_poly(den, &a))?))
}

/// `e^{-s Td} (cos(w1 Td) I - sin(w1 Td) J)`.
pub fn matrix_delay(td: f64, omega1: f64, s: Complex64) -> DqMatrix {
    let (sn, cs) = libm::sincos(omega1 * td);
    matrix_scale2((-s * td).exp(), &phasor_matrix(cs, -sn))
}

/// Block matrices of the converter admittance, built by matrix algebra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatrixAdmittance {
    pub y_total: DqMatrix,
    pub y_o: DqMatrix,
    pub y_ff: DqMatrix,
    pub y_pll: DqMatrix,
    pub y_cc: DqMatrix,
}

pub fn matrix_filter_impedance(p: &ConverterParams, s: Complex64) -> Result<DqMatrix> {
    matrix_shift(&[p.l, p.r], &[1.0], p.omega1, s)
}

pub fn matrix_cc_impedance(p: &ConverterParams, s: Complex64) -> DqMatrix {
    let cc = Complex64::new(p.kp_cc, 0.0) + p.ki_cc / s;
    let inner = matrix_add2(&diag(cc), &matrix_scale2(Complex64::new(-p.omega1 * p.l, 0.0), &j_matrix()));
    matrix_mul2(&matrix_delay(p.td, p.omega1, s), &inner)
}

fn pll_value(p: &ConverterParams, s: Complex64) -> Complex64 {
    (s * p.kp_pll + p.ki_pll) / (s * s + s * (p.v1 * p.kp_pll) + p.v1 * p.ki_pll)
}

pub fn matrix_converter_admittance(p: &ConverterParams, op: &OperatingPoint, s: Complex64) -> Result<MatrixAdmittance> {
    let d = matrix_delay(p.td, p.omega1, s);
    let cc = Complex64::new(p.kp_cc, 0.0) + p.ki_cc / s;
    let angle = matrix_mul2(&matrix_scale2(pll_value(p, s), &j_matrix()), &im_matrix());
    let g_pll = matrix_mul2(&matrix_mul2(&d, &phasor_matrix(op.u1_d, op.u1_q)), &angle);
    let g_cc = matrix_mul2(&matrix_mul2(&matrix_scale2(cc, &d), &phasor_matrix(op.i1_d, op.i1_q)), &angle);
    let z = matrix_add2(&matrix_filter_impedance(p, s)?, &matrix_cc_impedance(p, s));
    let y_o = matrix_inv2(&z)?;
    let y_ff = matrix_mul2(&y_o, &d);
    let y_pll = matrix_mul2(&y_o, &g_pll);
    let y_cc = matrix_mul2(&y_o, &g_cc);
    let y_total = matrix_add2(&matrix_add2(&matrix_scale2(-ONE, &y_o), &y_ff), &matrix_add2(&y_pll, &y_cc));
    Ok(MatrixAdmittance { y_total, y_o, y_ff, y_pll, y_cc })
}

pub fn matrix_grid_impedance(g: &GridParams, omega1: f64, s: Complex64) -> Result<DqMatrix> {
    matrix_shift(&[g.lg, g.rg], &[g.lg * g.cg, g.rg * g.cg, 1.0], omega1, s)
}

/// `det(I + Z Y)`.
pub fn matrix_characteristic(z: &DqMatrix, y: &DqMatrix) -> Complex64 {
    matrix_det2(&matrix_add2(&DqMatrix::IDENTITY, &matrix_mul2(z, y)))
}

fn pade_coeffs(order: usize) -> Vec<f64> {
    // c_k = (2n-k)! n! / ((2n)! k! (n-k)!), by the ratio c_{k+1}/c_k
    let n = order as f64;
    let mut c = vec![1.0];
    for k in 0..order {
        let kf = k as f64;
        let prev = c[k];
        c.push(prev * (n - kf) / ((2.0 * n - kf) * (kf + 1.0)));
    }
    c
}

/// Diagonal Padé approximant of `e^{-s Td}` of the given order.
pub fn pade_delay(td: f64, order: usize) -> Result<TransferElement> {
    if order < 1 {
        return Err(Error::InvalidRange("Pade order must be at least 1"));
    }
    if !(td >= 0.0) || !td.is_finite() {
        return Err(Error::InvalidRange("delay must be non-negative"));
    }
    let c = pade_coeffs(order);
    let mut num = Vec::with_capacity(order + 1);
    let mut den = Vec::with_capacity(order + 1);
    for k in (0..=order).rev() {
        let t = c[k] * libm::pow(td, k as f64);
        den.push(t);
        num.push(if k % 2 == 0 { t } else { -t });
    }
    TransferElement::rational(num, den)
}

/// Continuous-time linear model `dx = A x + B u`, `y = C x + D u`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Assembly("A is not square"));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Assembly("B rows or C columns differ from the state dimension"));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Assembly("D does not match C rows and B columns"));
        }
        Ok(StateSpaceModel { a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI - A)^-1 B + D` for a single-input single-output model.
    pub fn siso_response(&self, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let a = Complex64::new(-self.a[(i, j)], 0.0);
            if i == j {
                a + s
            } else {
                a
            }
        });
        let b = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(self.b[(i, 0)], 0.0));
        let x = m.lu().solve(&b).ok_or(Error::Singular)?;
        let y = (0..n).fold(Complex64::new(self.d[(0, 0)], 0.0), |acc, i| acc + x[i] * self.c[(0, i)]);
        Ok(y)
    }
}

/// Controllable-canonical realization of the Padé delay. The companion
/// form is built in normalized time `t / Td` and rescaled.
pub fn pade_state_space(td: f64, order: usize) -> Result<StateSpaceModel> {
    if order < 1 {
        return Err(Error::InvalidRange("Pade order must be at least 1"));
    }
    if !(td > 0.0) || !td.is_finite() {
        return Err(Error::InvalidRange("delay must be positive"));
    }
    let n = order;
    let c = pade_coeffs(n);
    // monic denominator in sigma = s Td, ascending powers
    let a: Vec<f64> = (0..n).map(|k| c[k] / c[n]).collect();
    let sign = |k: usize| if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    let d0 = sign(n);
    let b: Vec<f64> = (0..n).map(|k| sign(k) * c[k] / c[n] - d0 * a[k]).collect();
    let mut am = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        am[(i, i + 1)] = 1.0 / td;
    }
    for k in 0..n {
        am[(n - 1, k)] = -a[k] / td;
    }
    let mut bm = DMatrix::zeros(n, 1);
    bm[(n - 1, 0)] = 1.0 / td;
    let cm = DMatrix::from_fn(1, n, |_, k| b[k]);
    let dm = DMatrix::from_element(1, 1, d0);
    StateSpaceModel::new(am, bm, cm, dm)
}

// state layout of the closed loop
const I: usize = 0;
const VC: usize = 2;
const ILG: usize = 4;
const XI: usize = 6;
const XPLL: usize = 8;
const THETA: usize = 9;
const PADE: usize = 10;

fn jv(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

/// Closed-loop state matrix of converter plus grid.
///
/// States: converter current, PCC voltage, grid current, current-controller
/// integrators, PLL integrator and angle, then the Padé states of the d and
/// q channels. A zero delay drops the Padé states.
pub fn closed_loop_matrix(
    p: &ConverterParams,
    g: &GridParams,
    op: &OperatingPoint,
    pade_order: usize,
) -> Result<DMatrix<f64>> {
    let pade = if p.td > 0.0 { Some(pade_state_space(p.td, pade_order)?) } else { None };
    let np = pade.as_ref().map_or(0, |m| m.order());
    let n = PADE + 2 * np;
    let w1 = p.omega1;
    let (sn, cs) = libm::sincos(w1 * p.td);
    let u1 = [op.u1_d, op.u1_q];
    let i1 = [op.i1_d, op.i1_q];

    let deriv = |x: &[f64]| -> Vec<f64> {
        let mut dx = vec![0.0; n];
        let i = [x[I], x[I + 1]];
        let vc = [x[VC], x[VC + 1]];
        let ig = [x[ILG], x[ILG + 1]];
        let xi = [x[XI], x[XI + 1]];
        let theta = x[THETA];

        let e_vq = vc[1] - p.v1 * theta;
        dx[XPLL] = e_vq;
        dx[THETA] = p.kp_pll * e_vq + p.ki_pll * x[XPLL];

        let ji1 = jv(i1);
        let e_i = [-i[0] + ji1[0] * theta, -i[1] + ji1[1] * theta];
        dx[XI] = e_i[0];
        dx[XI + 1] = e_i[1];
        let ji = jv(i);
        let ju1 = jv(u1);
        let mut v_cmd = [0.0; 2];
        for k in 0..2 {
            v_cmd[k] = p.kp_cc * e_i[k] + p.ki_cc * xi[k] + w1 * p.l * ji[k] + vc[k] + ju1[k] * theta;
        }

        let w = match &pade {
            Some(m) => {
                let mut w = [0.0; 2];
                for ch in 0..2 {
                    let base = PADE + ch * np;
                    for r in 0..np {
                        let mut acc = m.b[(r, 0)] * v_cmd[ch];
                        for c in 0..np {
                            acc += m.a[(r, c)] * x[base + c];
                        }
                        dx[base + r] = acc;
                    }
                    let mut y = m.d[(0, 0)] * v_cmd[ch];
                    for c in 0..np {
                        y += m.c[(0, c)] * x[base + c];
                    }
                    w[ch] = y;
                }
                w
            }
            None => v_cmd,
        };
        let jw = jv(w);
        let v_o = [cs * w[0] - sn * jw[0], cs * w[1] - sn * jw[1]];

        let jvc = jv(vc);
        let jig = jv(ig);
        for k in 0..2 {
            dx[I + k] = (v_o[k] - vc[k] - p.r * i[k] - w1 * p.l * ji[k]) / p.l;
            dx[VC + k] = (i[k] + ig[k] - w1 * g.cg * jvc[k]) / g.cg;
            dx[ILG + k] = (-vc[k] - g.rg * ig[k] - w1 * g.lg * jig[k]) / g.lg;
        }
        dx
    };

    let mut a = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let d = deriv(&e);
        for row in 0..n {
            a[(row, col)] = d[row];
        }
        e[col] = 0.0;
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Assembly("non-finite entry in the state matrix"));
    }
    Ok(a)
}

/// State matrix of the grid alone (PCC voltage and grid current) with the
/// converter disconnected.
pub fn grid_only_matrix(g: &GridParams, omega1: f64) -> DMatrix<f64> {
    let (c, l, r, w) = (g.cg, g.lg, g.rg, omega1);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(4, 4, &[
        0.0,      w,        1.0 / c, 0.0,
        -w,       0.0,      0.0,     1.0 / c,
        -1.0 / l, 0.0,      -r / l,  w,
        0.0,      -1.0 / l, -w,      -r / l,
    ]);
    a
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Assembly("matrix is not square"));
    }
    let ev = a.clone().complex_eigenvalues();
    let out: Vec<Complex64> = ev.iter().map(|z| Complex64::new(z.re, z.im)).collect();
    if out.iter().any(|z| !z.is_finite()) {
        return Err(Error::EigenSolver);
    }
    Ok(out)
}

/// `min ||A v - lambda v|| / ||v||` over vectors reached by inverse
/// iteration from a fixed start.
pub fn eigen_residual(a: &DMatrix<f64>, lambda: Complex64) -> Result<f64> {
    let n = a.nrows();
    let norm = a.norm().max(f64::MIN_POSITIVE);
    let mu = lambda + Complex64::new(1e-10 * norm, 1e-10 * norm);
    let ac = DMatrix::<Complex64>::from_fn(n, n, |i, j| Complex64::new(a[(i, j)], 0.0));
    let shifted = DMatrix::<Complex64>::from_fn(n, n, |i, j| if i == j { ac[(i, j)] - mu } else { ac[(i, j)] });
    let lu = shifted.lu();
    let mut v = DVector::<Complex64>::from_fn(n, |i, _| Complex64::new(1.0 + i as f64 * 0.1, 0.3));
    for _ in 0..3 {
        let w = lu.solve(&v).ok_or(Error::EigenSolver)?;
        let s = w.norm();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::EigenSolver);
        }
        v = w / Complex64::new(s, 0.0);
    }
    let r = &ac * &v - &v * lambda;
    Ok(r.norm())
}

/// Eigenvalues of the closed loop with each residual checked against
/// `1e-8 ||A||`.
pub fn closed_loop_eigs(
    p: &ConverterParams,
    g: &GridParams,
    pade_order: usize,
    mode: U1Reference,
) -> Result<Vec<Complex64>> {
    p.validate()?;
    g.validate()?;
    let op = solve_operating_point(p, g, mode)?;
    let a = closed_loop_matrix(p, g, &op, pade_order)?;
    checked_eigenvalues(&a)
}

pub fn checked_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let ev = eigenvalues(a)?;
    let tol = 1e-8 * a.norm();
    for &l in &ev {
        if eigen_residual(a, l)? > tol {
            return Err(Error::EigenSolver);
        }
    }
    Ok(ev)
}

/// Eigenvalues with positive real part.
pub fn rhp_eigenvalues(eigs: &[Complex64]) -> Vec<Complex64> {
    eigs.iter().copied().filter(|z| z.re > 0.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_matrix() {
        assert_eq!(matrix_det2(&DqMatrix::IDENTITY), ONE);
        assert_eq!(matrix_eig2(&DqMatrix::IDENTITY), (ONE, ONE));
    }

    #[test]
    fn eig_small_root_is_accurate() {
        // roots 1e8 and 1e-8
        let m = DqMatrix::new(c(1e8, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1e-8, 0.0));
        let (a, b) = matrix_eig2(&m);
        assert_eq!(a, c(1e8, 0.0));
        assert!((b - c(1e-8, 0.0)).norm() < 1e-22);
    }

    #[test]
    fn inverse_singular() {
        let m = DqMatrix::new(ONE, ONE, ONE, ONE);
        assert_eq!(matrix_inv2(&m), Err(Error::Singular));
    }

    #[test]
    fn pade_first_order() {
        let td = 1e-3;
        let e = pade_delay(td, 1).unwrap();
        let s = c(0.0, 700.0);
        let want = (ONE - s * td / 2.0) / (ONE + s * td / 2.0);
        assert!((e.evaluate(s).unwrap() - want).norm() < 1e-14);
        assert!(pade_delay(td, 0).is_err());
    }

    #[test]
    fn pade_all_pass_and_phase() {
        let td = 150e-6;
        let e = pade_delay(td, 4).unwrap();
        for k in 1..=100 {
            let w = 2.0 * PI * 10.0 * k as f64;
            let h = e.evaluate(c(0.0, w)).unwrap();
            assert!((h.norm() - 1.0).abs() < 1e-12);
            let err = (h * c(0.0, w * td).exp()).arg().to_degrees().abs();
            assert!(err < 1.0);
        }
    }

    #[test]
    fn pade_realization_matches_transfer_function() {
        let td = 150e-6;
        let ss = pade_state_space(td, 4).unwrap();
        let tf = pade_delay(td, 4).unwrap();
        for w in [10.0, 2000.0, 30000.0] {
            let s = c(0.0, w);
            assert!((ss.siso_response(s).unwrap() - tf.evaluate(s).unwrap()).norm() < 1e-10);
        }
    }

    #[test]
    fn state_space_dimension_check() {
        let a = DMatrix::zeros(2, 3);
        let r = StateSpaceModel::new(a, DMatrix::zeros(2, 1), DMatrix::zeros(1, 2), DMatrix::zeros(1, 1));
        assert!(matches!(r, Err(Error::Assembly(_))));
    }

    #[test]
    fn grid_alone_is_not_unstable() {
        let g = GridParams::case_study();
        let ev = checked_eigenvalues(&grid_only_matrix(&g, 2.0 * PI * 50.0)).unwrap();
        assert!(ev.iter().all(|z| z.re <= 1e-9 * z.norm().max(1.0)));
        let g = GridParams { rg: 0.5, ..g };
        let ev = checked_eigenvalues(&grid_only_matrix(&g, 2.0 * PI * 50.0)).unwrap();
        assert!(ev.iter().all(|z| z.re < 0.0));
    }

    #[test]
    fn shifted_inductor_matrix() {
        let s = c(0.0, 900.0);
        let m = matrix_shift(&[3e-3, 0.0], &[1.0], 314.0, s).unwrap();
        assert!((m.dd - s * 3e-3).norm() < 1e-14);
        assert!((m.qd - c(314.0 * 3e-3, 0.0)).norm() < 1e-14);
        assert!((m.dq + c(314.0 * 3e-3, 0.0)).norm() < 1e-14);
    }
}
