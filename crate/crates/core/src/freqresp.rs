//! Scalar transfer elements and frequency grids.
//!
//! A [`TransferElement`] is a rational function of `s` with real
//! coefficients, optionally followed by an exact pure delay `exp(-s*T)`, or a
//! composition (sum, product, inverse, complex scale) of other elements.
//! Everything downstream only ever asks for `e(s)` at one complex frequency.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Absolute floor on `|den(s)|` below which evaluation reports a pole hit.
pub const POLE_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq)]
pub enum TransferElement {
    /// `num(s) / den(s) * exp(-s * delay)`, coefficients in descending powers.
    Rational {
        num: Vec<f64>,
        den: Vec<f64>,
        delay: f64,
    },
    Sum(Vec<TransferElement>),
    Product(Vec<TransferElement>),
    Inverse(Box<TransferElement>),
    Scale(Complex64, Box<TransferElement>),
}

fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

impl TransferElement {
    /// Rational element `num/den` without delay.
    pub fn rational(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::rational_with_delay(num, den, 0.0)
    }

    pub fn rational_with_delay(num: Vec<f64>, den: Vec<f64>, delay: f64) -> Result<Self> {
        if den.iter().all(|&c| c == 0.0) {
            return Err(Error::ZeroDenominator);
        }
        if !(delay >= 0.0) || !delay.is_finite() {
            return Err(Error::InvalidRange("delay must be finite and >= 0"));
        }
        let num = if num.is_empty() { alloc::vec![0.0] } else { num };
        Ok(TransferElement::Rational { num, den, delay })
    }

    pub fn constant(k: f64) -> Self {
        TransferElement::Rational { num: alloc::vec![k], den: alloc::vec![1.0], delay: 0.0 }
    }

    pub fn unit() -> Self {
        Self::constant(1.0)
    }

    /// Pure delay `exp(-s*td)`.
    pub fn delay(td: f64) -> Result<Self> {
        Self::rational_with_delay(alloc::vec![1.0], alloc::vec![1.0], td)
    }

    /// Series `R + sL`.
    pub fn series_rl(r: f64, l: f64) -> Self {
        TransferElement::Rational { num: alloc::vec![l, r], den: alloc::vec![1.0], delay: 0.0 }
    }

    /// `s * c`, e.g. the admittance of a capacitor.
    pub fn derivative(c: f64) -> Self {
        TransferElement::Rational { num: alloc::vec![c, 0.0], den: alloc::vec![1.0], delay: 0.0 }
    }

    /// Proportional-integral `kp + ki/s`.
    pub fn pi(kp: f64, ki: f64) -> Self {
        TransferElement::Rational { num: alloc::vec![kp, ki], den: alloc::vec![1.0, 0.0], delay: 0.0 }
    }

    pub fn inv(self) -> Self {
        TransferElement::Inverse(Box::new(self))
    }

    pub fn scale(self, k: Complex64) -> Self {
        TransferElement::Scale(k, Box::new(self))
    }

    /// Evaluates the element at complex frequency `s`.
    pub fn evaluate(&self, s: Complex64) -> Result<Complex64> {
        match self {
            TransferElement::Rational { num, den, delay } => {
                let d = horner(den, s);
                if d.norm() < POLE_FLOOR {
                    return Err(Error::PoleHit { s, omega: None });
                }
                let mut v = horner(num, s) / d;
                if *delay != 0.0 {
                    v *= (-s * *delay).exp();
                }
                Ok(v)
            }
            TransferElement::Sum(terms) => {
                terms.iter().try_fold(Complex64::new(0.0, 0.0), |acc, t| Ok(acc + t.evaluate(s)?))
            }
            TransferElement::Product(factors) => {
                factors.iter().try_fold(Complex64::new(1.0, 0.0), |acc, t| Ok(acc * t.evaluate(s)?))
            }
            TransferElement::Inverse(inner) => {
                let v = inner.evaluate(s)?;
                if v.norm() < POLE_FLOOR {
                    return Err(Error::PoleHit { s, omega: None });
                }
                Ok(v.inv())
            }
            TransferElement::Scale(k, inner) => Ok(*k * inner.evaluate(s)?),
        }
    }

    /// Evaluates on the imaginary axis, `s = j*omega`.
    pub fn at_omega(&self, omega: f64) -> Result<Complex64> {
        self.evaluate(Complex64::new(0.0, omega)).map_err(|e| e.at(omega))
    }

    /// True when no node of the tree carries a delay.
    pub fn is_delay_free(&self) -> bool {
        match self {
            TransferElement::Rational { delay, .. } => *delay == 0.0,
            TransferElement::Sum(v) | TransferElement::Product(v) => v.iter().all(Self::is_delay_free),
            TransferElement::Inverse(inner) | TransferElement::Scale(_, inner) => inner.is_delay_free(),
        }
    }
}

impl Add for TransferElement {
    type Output = TransferElement;

    fn add(self, rhs: TransferElement) -> TransferElement {
        match self {
            TransferElement::Sum(mut terms) => {
                terms.push(rhs);
                TransferElement::Sum(terms)
            }
            lhs => TransferElement::Sum(alloc::vec![lhs, rhs]),
        }
    }
}

impl Mul for TransferElement {
    type Output = TransferElement;

    fn mul(self, rhs: TransferElement) -> TransferElement {
        match self {
            TransferElement::Product(mut factors) => {
                factors.push(rhs);
                TransferElement::Product(factors)
            }
            lhs => TransferElement::Product(alloc::vec![lhs, rhs]),
        }
    }
}

impl Neg for TransferElement {
    type Output = TransferElement;

    fn neg(self) -> TransferElement {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Sub for TransferElement {
    type Output = TransferElement;

    fn sub(self, rhs: TransferElement) -> TransferElement {
        self + (-rhs)
    }
}

/// Strictly increasing list of positive angular frequencies (rad/s).
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
}

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

impl FrequencyGrid {
    pub fn new(omegas: Vec<f64>) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::InvalidRange("frequency grid is empty"));
        }
        if omegas.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidRange("frequencies must be finite and > 0"));
        }
        if omegas.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidRange("frequencies must be strictly increasing"));
        }
        Ok(FrequencyGrid { omegas })
    }

    pub fn from_hz(freqs: &[f64]) -> Result<Self> {
        Self::new(freqs.iter().map(|&f| hz_to_rad(f)).collect())
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn hz(&self) -> impl Iterator<Item = f64> + '_ {
        self.omegas.iter().map(|&w| rad_to_hz(w))
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Merges two grids; points closer than 1e-12 relative are treated as one.
    pub fn merge(&self, other: &FrequencyGrid) -> FrequencyGrid {
        let mut all: Vec<f64> = self.omegas.iter().chain(other.omegas.iter()).copied().collect();
        all.sort_by(|a, b| a.total_cmp(b));
        let mut out: Vec<f64> = Vec::with_capacity(all.len());
        for w in all {
            match out.last() {
                Some(&prev) if (w - prev).abs() <= 1e-12 * w.abs() => {}
                _ => out.push(w),
            }
        }
        FrequencyGrid { omegas: out }
    }
}

/// Logarithmically spaced grid in Hz, both endpoints included.
///
/// The number of intervals is `ceil(points_per_decade * decades)`, so whole
/// decades land exactly on the requested density.
pub fn make_log_grid(f_min: f64, f_max: f64, points_per_decade: usize) -> Result<FrequencyGrid> {
    if !(f_min > 0.0 && f_max > f_min && f_max.is_finite()) {
        return Err(Error::InvalidRange("need 0 < f_min < f_max"));
    }
    if points_per_decade < 1 {
        return Err(Error::InvalidRange("points_per_decade must be >= 1"));
    }
    let decades = libm::log10(f_max / f_min);
    let intervals = libm::ceil(points_per_decade as f64 * decades - 1e-9).max(1.0) as usize;
    let mut hz: Vec<f64> =
        (0..=intervals).map(|i| f_min * libm::pow(10.0, decades * i as f64 / intervals as f64)).collect();
    hz[0] = f_min;
    hz[intervals] = f_max;
    FrequencyGrid::from_hz(&hz)
}

/// Inserts `points` linear samples across `[f_center - span/2, f_center + span/2]` (Hz).
///
/// A zero span inserts `f_center` alone.
pub fn refine_around(g: &FrequencyGrid, f_center: f64, span: f64, points: usize) -> Result<FrequencyGrid> {
    if !(span >= 0.0) || !(f_center - span / 2.0 > 0.0) || !f_center.is_finite() {
        return Err(Error::InvalidRange("refinement window must stay above 0 Hz"));
    }
    let extra: Vec<f64> = if span == 0.0 || points <= 1 {
        alloc::vec![f_center]
    } else {
        let lo = f_center - span / 2.0;
        let step = span / (points - 1) as f64;
        (0..points).map(|i| lo + step * i as f64).collect()
    };
    Ok(g.merge(&FrequencyGrid::from_hz(&extra)?))
}

/// Sweep configuration: a log grid plus one refinement pass around the
/// coarse minimum of the characteristic equation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSettings {
    pub f_min: f64,
    pub f_max: f64,
    pub points_per_decade: usize,
    /// Full width (Hz) of the refinement window.
    pub refine_span: f64,
    pub refine_points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        GridSettings { f_min: 10.0, f_max: 1000.0, points_per_decade: 200, refine_span: 40.0, refine_points: 200 }
    }
}

impl GridSettings {
    pub fn validate(&self) -> Result<()> {
        make_log_grid(self.f_min, self.f_max, self.points_per_decade)?;
        if !(self.refine_span >= 0.0 && self.refine_span.is_finite()) {
            return Err(Error::InvalidRange("refine_span must be >= 0"));
        }
        Ok(())
    }

    pub fn coarse_grid(&self) -> Result<FrequencyGrid> {
        make_log_grid(self.f_min, self.f_max, self.points_per_decade)
    }
}
