//! Pauli decomposition of 2x2 dq-frame matrices.
//!
//! A real 2x2 transfer matrix in the dq frame is written as
//!
//! ```text
//! M = Q0*I + Q2*J + Q3*K + Q1*JK
//!   = [ Q0 + Q3   Q1 - Q2 ]
//!     [ Q1 + Q2   Q0 - Q3 ]
//! ```
//!
//! with `J = -j*sigma2` (90 degree rotation), `K = sigma3` (reflection on the
//! d axis) and `JK = sigma1` (swap). In terms of the complex Pauli matrices the
//! same matrix is the quaternion-like object `Q0 + <q, sigma>` with vector part
//! `q = [Q1, -j*Q2, Q3]` and the unconjugated dot product. Products, the
//! semi-norm (`det M`), eigenvalues and the characteristic equation of the
//! minor loop all follow from that vector form.
//!
//! Quaternions here are per-frequency samples: each coefficient is the value
//! of a real transfer function at one complex frequency.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::freqresp::TransferElement;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const J_UNIT: Complex64 = Complex64::new(0.0, 1.0);

/// Entries of a 2x2 dq-frame matrix at one frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DqMatrix {
    pub dd: Complex64,
    pub dq: Complex64,
    pub qd: Complex64,
    pub qq: Complex64,
}

impl DqMatrix {
    pub const fn new(dd: Complex64, dq: Complex64, qd: Complex64, qq: Complex64) -> Self {
        DqMatrix { dd, dq, qd, qq }
    }

    pub const IDENTITY: DqMatrix = DqMatrix::new(ONE, ZERO, ZERO, ONE);

    pub fn is_finite(&self) -> bool {
        [self.dd, self.dq, self.qd, self.qq].iter().all(|c| c.is_finite())
    }

    /// Applies the matrix to a column vector `[d; q]`.
    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [self.dd * v[0] + self.dq * v[1], self.qd * v[0] + self.qq * v[1]]
    }
}

/// Four complex coefficients `(Q0, Q1, Q2, Q3)` of a Pauli quaternion.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PauliQuaternion {
    pub q0: Complex64,
    pub q1: Complex64,
    pub q2: Complex64,
    pub q3: Complex64,
}

impl PauliQuaternion {
    pub const fn new(q0: Complex64, q1: Complex64, q2: Complex64, q3: Complex64) -> Self {
        PauliQuaternion { q0, q1, q2, q3 }
    }

    /// Quaternion with real coefficients.
    pub const fn real(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        PauliQuaternion::new(
            Complex64::new(q0, 0.0),
            Complex64::new(q1, 0.0),
            Complex64::new(q2, 0.0),
            Complex64::new(q3, 0.0),
        )
    }

    pub const ZERO: PauliQuaternion = PauliQuaternion::real(0.0, 0.0, 0.0, 0.0);
    pub const ONE: PauliQuaternion = PauliQuaternion::real(1.0, 0.0, 0.0, 0.0);
    /// `J`, the 90 degree rotation.
    pub const J: PauliQuaternion = PauliQuaternion::real(0.0, 0.0, 1.0, 0.0);
    /// `K = sigma3`, reflection on the d axis.
    pub const K: PauliQuaternion = PauliQuaternion::real(0.0, 0.0, 0.0, 1.0);
    /// `JK = sigma1`, swap of the d and q components.
    pub const JK: PauliQuaternion = PauliQuaternion::real(0.0, 1.0, 0.0, 0.0);

    pub fn scalar(q0: Complex64) -> Self {
        PauliQuaternion::new(q0, ZERO, ZERO, ZERO)
    }

    pub fn coeffs(&self) -> [Complex64; 4] {
        [self.q0, self.q1, self.q2, self.q3]
    }

    pub fn from_coeffs(c: [Complex64; 4]) -> Self {
        PauliQuaternion::new(c[0], c[1], c[2], c[3])
    }

    /// Vector part `[Q1, -j*Q2, Q3]` on the complex Pauli basis.
    pub fn vector(&self) -> [Complex64; 3] {
        [self.q1, -J_UNIT * self.q2, self.q3]
    }

    /// Builds a quaternion from its scalar part and Pauli vector part.
    pub fn from_vector(q0: Complex64, v: [Complex64; 3]) -> Self {
        PauliQuaternion::new(q0, v[0], J_UNIT * v[1], v[2])
    }

    pub fn scale(&self, c: Complex64) -> Self {
        PauliQuaternion::new(c * self.q0, c * self.q1, c * self.q2, c * self.q3)
    }

    /// `Q0^2 - Q1^2 + Q2^2 - Q3^2`, equal to the determinant of the matrix.
    pub fn semi_norm_sq(&self) -> Complex64 {
        self.q0 * self.q0 - self.q1 * self.q1 + self.q2 * self.q2 - self.q3 * self.q3
    }

    /// Principal square root of [`semi_norm_sq`](Self::semi_norm_sq).
    ///
    /// The branch cut lies on the negative real axis of the semi-norm
    /// squared; callers that only need magnitudes should use
    /// [`magnitude_sq`](Self::magnitude_sq), which is branch-free.
    pub fn semi_norm(&self) -> Complex64 {
        self.semi_norm_sq().sqrt()
    }

    /// `||q|| * conj(||q||) = |semi_norm_sq|`, real and non-negative.
    pub fn magnitude_sq(&self) -> f64 {
        self.semi_norm_sq().norm()
    }

    /// Semi-norm squared of the vector part alone: `Q1^2 - Q2^2 + Q3^2`.
    pub fn vector_semi_norm_sq(&self) -> Complex64 {
        self.q1 * self.q1 - self.q2 * self.q2 + self.q3 * self.q3
    }

    /// Inverse `(Q0, -Q1, -Q2, -Q3) / ||q||^2`.
    ///
    /// Fails when `|semi_norm_sq|` is below `1e-14` times the largest squared
    /// coefficient magnitude.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.semi_norm_sq();
        let scale = self.coeffs().iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
        if !(n.norm() > 1e-14 * scale) {
            return Err(Error::SingularQuaternion { omega: None });
        }
        let inv = n.inv();
        Ok(PauliQuaternion::new(self.q0 * inv, -self.q1 * inv, -self.q2 * inv, -self.q3 * inv))
    }

    /// Mirror-frequency decoupled: no `K` content (`Q1 = Q3 = 0`).
    pub fn is_mfd(&self, tol: f64) -> bool {
        let scale = self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        self.q1.norm() <= tol * scale && self.q3.norm() <= tol * scale
    }

    /// Positive-sequence complex transfer function `Q0 + j*Q2`.
    pub fn ctf_positive(&self) -> Complex64 {
        self.q0 + J_UNIT * self.q2
    }

    /// Negative-sequence complex transfer function `Q3 + j*Q1`.
    pub fn ctf_negative(&self) -> Complex64 {
        self.q3 + J_UNIT * self.q1
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs().iter().all(|c| c.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn dot3(a: [Complex64; 3], b: [Complex64; 3]) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [Complex64; 3], b: [Complex64; 3]) -> [Complex64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// `<z, y> = Z0*Y0 + <z_vec, y_vec>` with the unconjugated vector dot product.
///
/// This is the scalar part of `z*y`: `Z0Y0 + Z1Y1 - Z2Y2 + Z3Y3`.
pub fn dot(z: &PauliQuaternion, y: &PauliQuaternion) -> Complex64 {
    z.q0 * y.q0 + dot3(z.vector(), y.vector())
}

/// Splits a dq matrix into its Pauli coefficients.
pub fn decompose(m: &DqMatrix) -> PauliQuaternion {
    PauliQuaternion::new((m.dd + m.qq) * 0.5, (m.qd + m.dq) * 0.5, (m.qd - m.dq) * 0.5, (m.dd - m.qq) * 0.5)
}

/// Rebuilds `[Q0+Q3, Q1-Q2; Q1+Q2, Q0-Q3]`.
pub fn recompose(q: &PauliQuaternion) -> DqMatrix {
    DqMatrix::new(q.q0 + q.q3, q.q1 - q.q2, q.q1 + q.q2, q.q0 - q.q3)
}

/// Product in vector form: `L0 = Z0Y0 + <z,y>`, `L = Z0 y + Y0 z + j (z x y)`.
pub fn q_mul(z: &PauliQuaternion, y: &PauliQuaternion) -> PauliQuaternion {
    let (zv, yv) = (z.vector(), y.vector());
    let cross = cross3(zv, yv);
    let l0 = z.q0 * y.q0 + dot3(zv, yv);
    let lv = [
        z.q0 * yv[0] + y.q0 * zv[0] + J_UNIT * cross[0],
        z.q0 * yv[1] + y.q0 * zv[1] + J_UNIT * cross[1],
        z.q0 * yv[2] + y.q0 * zv[2] + J_UNIT * cross[2],
    ];
    PauliQuaternion::from_vector(l0, lv)
}

pub fn q_add(a: &PauliQuaternion, b: &PauliQuaternion) -> PauliQuaternion {
    PauliQuaternion::new(a.q0 + b.q0, a.q1 + b.q1, a.q2 + b.q2, a.q3 + b.q3)
}

pub fn q_scale(c: Complex64, a: &PauliQuaternion) -> PauliQuaternion {
    a.scale(c)
}

pub fn q_inverse(q: &PauliQuaternion) -> Result<PauliQuaternion> {
    q.inverse()
}

/// `Re = (I + K)/2`: keeps the d component, `[i_d; i_q] -> [i_d; 0]`.
pub fn re_operator() -> PauliQuaternion {
    PauliQuaternion::real(0.5, 0.0, 0.0, 0.5)
}

/// `Im = J(K - I)/2`: moves the q component to d, `[i_d; i_q] -> [i_q; 0]`.
pub fn im_operator() -> PauliQuaternion {
    PauliQuaternion::real(0.0, 0.5, -0.5, 0.0)
}

impl Add for PauliQuaternion {
    type Output = PauliQuaternion;
    fn add(self, rhs: PauliQuaternion) -> PauliQuaternion {
        q_add(&self, &rhs)
    }
}

impl Sub for PauliQuaternion {
    type Output = PauliQuaternion;
    fn sub(self, rhs: PauliQuaternion) -> PauliQuaternion {
        q_add(&self, &(-rhs))
    }
}

impl Neg for PauliQuaternion {
    type Output = PauliQuaternion;
    fn neg(self) -> PauliQuaternion {
        PauliQuaternion::new(-self.q0, -self.q1, -self.q2, -self.q3)
    }
}

impl Mul for PauliQuaternion {
    type Output = PauliQuaternion;
    fn mul(self, rhs: PauliQuaternion) -> PauliQuaternion {
        q_mul(&self, &rhs)
    }
}

impl Mul<Complex64> for PauliQuaternion {
    type Output = PauliQuaternion;
    fn mul(self, rhs: Complex64) -> PauliQuaternion {
        self.scale(rhs)
    }
}

/// Quaternion sample of the frequency shift `h(s*I + J*w1)`.
pub fn shift_sample(h: &TransferElement, omega1: f64, s: Complex64) -> Result<PauliQuaternion> {
    let up = h.evaluate(s + J_UNIT * omega1)?;
    let down = h.evaluate(s - J_UNIT * omega1)?;
    Ok(PauliQuaternion::new((up + down) * 0.5, ZERO, (up - down) / (2.0 * J_UNIT), ZERO))
}

/// A mapping from complex frequency `s` to a [`PauliQuaternion`].
#[derive(Clone, Debug, PartialEq)]
pub enum QuaternionElement {
    Constant(PauliQuaternion),
    /// Each coefficient given by its own scalar element; `None` is zero.
    Components(Box<[Option<TransferElement>; 4]>),
    /// `h(s*I + J*w1)`.
    Shifted {
        base: TransferElement,
        omega1: f64,
    },
    Sum(Vec<QuaternionElement>),
    Product(Vec<QuaternionElement>),
    Inverse(Box<QuaternionElement>),
    Neg(Box<QuaternionElement>),
}

/// Matrix equivalent of the frequency shift `s -> s*I + J*w1`.
///
/// The result has `Q0 = (h(s+jw1) + h(s-jw1))/2`, `Q2 = (h(s+jw1) - h(s-jw1))/2j`
/// and no `K` content.
pub fn frequency_shift(h: TransferElement, omega1: f64) -> QuaternionElement {
    QuaternionElement::Shifted { base: h, omega1 }
}

impl QuaternionElement {
    pub fn constant(q: PauliQuaternion) -> Self {
        QuaternionElement::Constant(q)
    }

    /// `h(s) * I`.
    pub fn scalar(h: TransferElement) -> Self {
        QuaternionElement::Components(Box::new([Some(h), None, None, None]))
    }

    /// `h(s) * J`.
    pub fn j_scaled(h: TransferElement) -> Self {
        QuaternionElement::Components(Box::new([None, None, Some(h), None]))
    }

    pub fn components(c: [Option<TransferElement>; 4]) -> Self {
        QuaternionElement::Components(Box::new(c))
    }

    pub fn inverse(self) -> Self {
        QuaternionElement::Inverse(Box::new(self))
    }

    pub fn evaluate(&self, s: Complex64) -> Result<PauliQuaternion> {
        match self {
            QuaternionElement::Constant(q) => Ok(*q),
            QuaternionElement::Components(c) => {
                let mut out = [ZERO; 4];
                for (slot, e) in out.iter_mut().zip(c.iter()) {
                    if let Some(e) = e {
                        *slot = e.evaluate(s)?;
                    }
                }
                Ok(PauliQuaternion::from_coeffs(out))
            }
            QuaternionElement::Shifted { base, omega1 } => shift_sample(base, *omega1, s),
            QuaternionElement::Sum(terms) => {
                terms.iter().try_fold(PauliQuaternion::ZERO, |acc, t| Ok(acc + t.evaluate(s)?))
            }
            QuaternionElement::Product(factors) => {
                factors.iter().try_fold(PauliQuaternion::ONE, |acc, t| Ok(acc * t.evaluate(s)?))
            }
            QuaternionElement::Inverse(inner) => inner.evaluate(s)?.inverse(),
            QuaternionElement::Neg(inner) => Ok(-inner.evaluate(s)?),
        }
    }

    /// Evaluates at `s = j*omega`, tagging errors with `omega`.
    pub fn at_omega(&self, omega: f64) -> Result<PauliQuaternion> {
        self.evaluate(Complex64::new(0.0, omega)).map_err(|e| e.at(omega))
    }
}

impl Add for QuaternionElement {
    type Output = QuaternionElement;
    fn add(self, rhs: QuaternionElement) -> QuaternionElement {
        match self {
            QuaternionElement::Sum(mut terms) => {
                terms.push(rhs);
                QuaternionElement::Sum(terms)
            }
            lhs => QuaternionElement::Sum(alloc::vec![lhs, rhs]),
        }
    }
}

impl Mul for QuaternionElement {
    type Output = QuaternionElement;
    fn mul(self, rhs: QuaternionElement) -> QuaternionElement {
        match self {
            QuaternionElement::Product(mut factors) => {
                factors.push(rhs);
                QuaternionElement::Product(factors)
            }
            lhs => QuaternionElement::Product(alloc::vec![lhs, rhs]),
        }
    }
}

impl Neg for QuaternionElement {
    type Output = QuaternionElement;
    fn neg(self) -> QuaternionElement {
        QuaternionElement::Neg(Box::new(self))
    }
}

impl Sub for QuaternionElement {
    type Output = QuaternionElement;
    fn sub(self, rhs: QuaternionElement) -> QuaternionElement {
        self + (-rhs)
    }
}
