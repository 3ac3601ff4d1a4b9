use num_complex::Complex64;
use proptest::prelude::*;

use paulistab_core::freqresp::{make_log_grid, refine_around, TransferElement};
use paulistab_core::oracles::{matrix_det2, matrix_eig2, matrix_inv2, matrix_mul2};
use paulistab_core::pauli::{decompose, frequency_shift, recompose, DqMatrix, PauliQuaternion};
use paulistab_core::stability::{characteristic, contribution_terms, eigenvalues};

fn cplx() -> impl Strategy<Value = Complex64> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_map(|(a, b)| Complex64::new(a, b))
}

fn quat() -> impl Strategy<Value = PauliQuaternion> {
    (cplx(), cplx(), cplx(), cplx()).prop_map(|(a, b, c, d)| PauliQuaternion::new(a, b, c, d))
}

fn mat() -> impl Strategy<Value = DqMatrix> {
    (cplx(), cplx(), cplx(), cplx()).prop_map(|(a, b, c, d)| DqMatrix::new(a, b, c, d))
}

fn rel(a: Complex64, b: Complex64, scale: f64) -> f64 {
    (a - b).norm() / scale.max(1e-300)
}

fn mat_scale(m: &DqMatrix) -> f64 {
    [m.dd, m.dq, m.qd, m.qq].iter().map(|c| c.norm()).fold(0.0, f64::max)
}

fn mat_close(a: &DqMatrix, b: &DqMatrix, tol: f64) -> bool {
    let s = mat_scale(a).max(mat_scale(b));
    [(a.dd, b.dd), (a.dq, b.dq), (a.qd, b.qd), (a.qq, b.qq)].iter().all(|&(x, y)| rel(x, y, s) <= tol)
}

fn set_close(a: (Complex64, Complex64), b: (Complex64, Complex64), tol: f64) -> bool {
    let s = a.0.norm().max(a.1.norm()).max(b.0.norm()).max(b.1.norm()).max(1e-300);
    let straight = rel(a.0, b.0, s).max(rel(a.1, b.1, s));
    let swapped = rel(a.0, b.1, s).max(rel(a.1, b.0, s));
    straight.min(swapped) <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn round_trip(m in mat()) {
        let back = recompose(&decompose(&m));
        prop_assert!(mat_close(&back, &m, 1e-15));
    }

    #[test]
    fn linearity(a in mat(), b in mat()) {
        let sum = DqMatrix::new(a.dd + b.dd, a.dq + b.dq, a.qd + b.qd, a.qq + b.qq);
        let q = decompose(&a) + decompose(&b);
        prop_assert!(mat_close(&recompose(&q), &sum, 1e-15));
    }

    #[test]
    fn product_homomorphism(a in quat(), b in quat()) {
        let want = matrix_mul2(&recompose(&a), &recompose(&b));
        prop_assert!(mat_close(&recompose(&(a * b)), &want, 1e-12));
    }

    #[test]
    fn semi_norm_is_det(q in quat()) {
        let d = matrix_det2(&recompose(&q));
        let scale = q.max_abs().powi(2);
        prop_assert!(rel(q.semi_norm_sq(), d, scale) <= 1e-12);
    }

    #[test]
    fn multiplicativity(a in quat(), b in quat()) {
        let lhs = (a * b).semi_norm_sq();
        let rhs = a.semi_norm_sq() * b.semi_norm_sq();
        let scale = (a.max_abs() * b.max_abs()).powi(2);
        prop_assert!(rel(lhs, rhs, scale) <= 1e-12);
    }

    #[test]
    fn inverse_is_inverse(q in quat()) {
        prop_assume!(q.semi_norm_sq().norm() > 1e-9 * q.max_abs().powi(2).max(1.0));
        let inv = q.inverse().unwrap();
        let p = q * inv;
        let one = PauliQuaternion::ONE;
        let err = (0..4).map(|k| (p.coeffs()[k] - one.coeffs()[k]).norm()).fold(0.0, f64::max);
        let cond = q.max_abs().powi(2) / q.semi_norm_sq().norm();
        prop_assert!(err <= 1e-12 * cond.max(1.0));
        let mi = matrix_inv2(&recompose(&q)).unwrap();
        prop_assert!(mat_close(&recompose(&inv), &mi, 1e-12 * cond.max(1.0)));
    }

    #[test]
    fn eigen_sets_agree(q in quat()) {
        let (a, b) = eigenvalues(&q);
        let m = matrix_eig2(&recompose(&q));
        prop_assert!(set_close((a, b), m, 1e-9));
        prop_assert!(rel(a + b, q.q0 * 2.0, q.max_abs()) <= 1e-12);
    }

    #[test]
    fn mfd_iff_commutes_with_j(q in quat(), kill in any::<bool>()) {
        let q = if kill { PauliQuaternion::new(q.q0, Complex64::new(0.0, 0.0), q.q2, Complex64::new(0.0, 0.0)) } else { q };
        let j = recompose(&PauliQuaternion::J);
        let m = recompose(&q);
        let commutes = mat_close(&matrix_mul2(&m, &j), &matrix_mul2(&j, &m), 1e-14);
        prop_assert_eq!(q.is_mfd(1e-14), commutes);
    }

    #[test]
    fn contributions_sum_to_characteristic(z in quat(), y in quat()) {
        let l: Complex64 = contribution_terms(&z, &y).iter().sum();
        let want = characteristic(&z, &y);
        let scale = 1.0 + (z.max_abs() * y.max_abs()).powi(2);
        prop_assert!(rel(Complex64::new(1.0, 0.0) + l, want, scale) <= 1e-12);
    }

    #[test]
    fn transfer_conjugate_symmetry(num in prop::collection::vec(-5.0f64..5.0, 1..4),
                                   den in prop::collection::vec(0.1f64..5.0, 1..4),
                                   re in -3.0f64..3.0, im in -50.0f64..50.0) {
        let e = TransferElement::rational(num, den).unwrap();
        let s = Complex64::new(re, im);
        if let (Ok(a), Ok(b)) = (e.evaluate(s), e.evaluate(s.conj())) {
            prop_assert!(rel(a.conj(), b, a.norm().max(1.0)) <= 1e-14);
            prop_assert_eq!(e.evaluate(s).unwrap(), a);
        }
    }

    #[test]
    fn composition_homomorphism(a in prop::collection::vec(-5.0f64..5.0, 1..4),
                                b in prop::collection::vec(0.5f64..5.0, 1..4),
                                td in 0.0f64..1e-3, w in 1.0f64..1e4) {
        let x = TransferElement::rational_with_delay(a.clone(), b.clone(), td).unwrap();
        let y = TransferElement::rational(b, a.iter().map(|v| v.abs() + 0.5).collect()).unwrap();
        let s = Complex64::new(0.0, w);
        let (xs, ys) = (x.evaluate(s).unwrap(), y.evaluate(s).unwrap());
        let scale = (xs.norm() + 1.0) * (ys.norm() + 1.0);
        prop_assert!(rel((x.clone() * y.clone()).evaluate(s).unwrap(), xs * ys, scale) <= 1e-12);
        prop_assert!(rel((x.clone() + y.clone()).evaluate(s).unwrap(), xs + ys, scale) <= 1e-12);
        if xs.norm() > 1e-6 {
            prop_assert!(rel(x.clone().inv().evaluate(s).unwrap(), xs.inv(), xs.inv().norm()) <= 1e-12);
        }
    }

    #[test]
    fn shift_of_real_rational_has_no_k_part(num in prop::collection::vec(-5.0f64..5.0, 1..3),
                                             w in 1.0f64..1e4, w1 in 1.0f64..500.0) {
        let e = TransferElement::rational(num, vec![1.0, 3.0, 1e4]).unwrap();
        let q = frequency_shift(e, w1).evaluate(Complex64::new(0.0, w)).unwrap();
        prop_assert!(q.q1.norm() == 0.0 && q.q3.norm() == 0.0);
    }

    #[test]
    fn log_grid_is_valid(f0 in 0.1f64..100.0, ratio in 1.01f64..1e4, ppd in 1usize..300) {
        let g = make_log_grid(f0, f0 * ratio, ppd).unwrap();
        let hz: Vec<f64> = g.hz().collect();
        prop_assert!((hz[0] - f0).abs() <= 1e-12 * f0);
        prop_assert!((hz[hz.len() - 1] - f0 * ratio).abs() <= 1e-9 * f0 * ratio);
        prop_assert!(g.omegas().windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn refine_keeps_grid_sorted(fc in 20.0f64..900.0, span in 0.0f64..30.0, n in 0usize..50) {
        let g = make_log_grid(10.0, 1000.0, 20).unwrap();
        let r = refine_around(&g, fc, span, n).unwrap();
        prop_assert!(r.omegas().windows(2).all(|p| p[1] > p[0]));
        prop_assert!(r.len() >= g.len());
    }
}
