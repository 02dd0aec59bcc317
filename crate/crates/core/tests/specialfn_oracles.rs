//! Frozen values from `oracles/oracle_values.py` (mpmath, 30+ digits).

mod common;

use common::{GAMMA_POINTS, ML_POINTS};
use num_complex::Complex64;
use smfj::specialfn::{complex_gamma, gamma, gl_weights, mittag_leffler, rl_derivative_gl};

#[test]
fn mittag_leffler_matches_high_precision_series() {
    for &(a, b, zr, zi, er, ei) in ML_POINTS.iter() {
        let got = mittag_leffler(a, b, Complex64::new(zr, zi)).unwrap();
        let err = (got - Complex64::new(er, ei)).norm();
        assert!(err <= 1e-8, "E_({a},{b})({zr}+{zi}i): got {got}, err {err:e}");
    }
}

#[test]
fn mittag_leffler_erfc_identity() {
    let v = mittag_leffler(0.5, 1.0, Complex64::new(1.0, 0.0)).unwrap();
    assert!((v.re - 5.008_980_080_762_283_466_3).abs() < 1e-12);
}

#[test]
fn mittag_leffler_matches_exp_on_real_line() {
    for i in 0..=100 {
        let x = -5.0 + 0.1 * i as f64;
        let v = mittag_leffler(1.0, 1.0, Complex64::new(x, 0.0)).unwrap();
        assert!((v.re - x.exp()).abs() < 1e-10);
    }
}

#[test]
fn mittag_leffler_completely_monotone_on_negative_axis() {
    for &a in &[0.2, 0.35, 0.5, 0.65, 0.9] {
        let mut prev = f64::INFINITY;
        for i in 0..=200 {
            let xi = 0.1 * i as f64;
            let v = mittag_leffler(a, 1.0, Complex64::new(-xi, 0.0)).unwrap().re;
            assert!(v > 0.0 && v < prev, "alpha {a} xi {xi}: {v} after {prev}");
            prev = v;
        }
    }
}

#[test]
fn mittag_leffler_near_one_approaches_exponential() {
    for i in 0..=50 {
        let xi = 0.1 * i as f64;
        let v = mittag_leffler(0.999, 1.0, Complex64::new(-xi, 0.0)).unwrap().re;
        assert!((v - (-xi).exp()).abs() < 1e-3);
    }
}

#[test]
fn complex_gamma_matches_oracle() {
    for &(zr, zi, gr, gi) in GAMMA_POINTS.iter() {
        let g = complex_gamma(Complex64::new(zr, zi)).unwrap();
        let exact = Complex64::new(gr, gi);
        assert!(
            (g - exact).norm() <= 1e-12 * exact.norm(),
            "Gamma({zr}+{zi}i) = {g} vs {exact}"
        );
    }
}

#[test]
fn complex_gamma_recurrence_and_reflection() {
    use std::f64::consts::PI;
    for &(x, y) in &[(0.3, 0.7), (-2.4, 1.1), (4.2, -3.3), (-7.6, 0.2), (9.1, 2.0)] {
        let z = Complex64::new(x, y);
        let g = complex_gamma(z).unwrap();
        let g1 = complex_gamma(z + 1.0).unwrap();
        assert!((g1 - z * g).norm() <= 1e-12 * g1.norm());
        let refl = g * complex_gamma(Complex64::new(1.0, 0.0) - z).unwrap() * (z * PI).sin();
        assert!((refl - PI).norm() <= 1e-11 * PI);
    }
}

#[test]
fn gl_partial_sums() {
    let w = gl_weights(0.65, 2000).unwrap();
    let s: f64 = w.weights().iter().sum();
    assert!(s > 0.0 && s < 0.01);
    assert!((s - 0.002_809_076_072_722_151_564).abs() < 1e-12);
    for &g in &[0.2, 0.5, 0.8] {
        let n = 10_000usize;
        let tot: f64 = gl_weights(g, n + 1).unwrap().weights().iter().sum();
        assert!(tot > 0.0 && tot < 10.0 * (n as f64).powf(-g) / gamma(1.0 - g));
    }
}

#[test]
fn weights_follow_recurrence_bit_exactly() {
    let table = gl_weights(0.35, 5000).unwrap();
    let w = table.weights();
    for k in 1..w.len() {
        assert_eq!(w[k], w[k - 1] * (1.0 - 1.35 / k as f64));
    }
}

fn err_constant(g: f64, n: usize) -> f64 {
    let dt = 1.0 / n as f64;
    let d = rl_derivative_gl(&vec![1.0; n + 1], g, dt).unwrap();
    (d[n] - 1.0 / gamma(1.0 - g)).abs()
}

fn err_linear(g: f64, n: usize) -> f64 {
    let dt = 1.0 / n as f64;
    let f: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let d = rl_derivative_gl(&f, g, dt).unwrap();
    (d[n] - 1.0 / gamma(2.0 - g)).abs()
}

#[test]
fn rl_derivative_converges_at_first_order() {
    for f in [err_constant as fn(f64, usize) -> f64, err_linear] {
        let (e1, e2, e3) = (f(0.5, 200), f(0.5, 400), f(0.5, 800));
        let (r1, r2) = ((e1 / e2).log2(), (e2 / e3).log2());
        assert!((0.9..1.1).contains(&r1) && (0.9..1.1).contains(&r2), "rates {r1} {r2}");
        assert!(e3 < 2e-3);
    }
    let zero = rl_derivative_gl(&[0.0; 50], 0.4, 0.01).unwrap();
    assert!(zero.iter().all(|v| *v == 0.0));
}
