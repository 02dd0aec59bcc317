mod common;

use common::{BS_ATM_CALL, LAPLACE_ML_035, LAPLACE_ML_065, MERTON_CALL};
use num_complex::Complex64;
use proptest::prelude::*;
use smfj::closed_form::{bs_call, bs_put, merton_call};
use smfj::transform::{
    invert_laplace_talbot, model_discount, price_european_transform, price_strip, TransformConfig,
};
use smfj::{Diagnostics, ModelParams, OptionContract, OptionKind};

fn price(c: &OptionContract, p: &ModelParams) -> f64 {
    price_european_transform(c, p, &TransformConfig::default()).unwrap().price
}

#[test]
fn black_scholes_grid() {
    let p = ModelParams::black_scholes(0.2, 0.05);
    assert!((price(&OptionContract::call(100.0, 100.0, 1.0), &p) - BS_ATM_CALL).abs() < 1e-8);
    for k in [90.0, 100.0, 110.0] {
        for t in [0.25, 1.0, 2.0] {
            let c = price(&OptionContract::call(100.0, k, t), &p);
            let q = price(&OptionContract::put(100.0, k, t), &p);
            assert!((c - bs_call(100.0, k, t, 0.05, 0.2)).abs() < 1e-8, "call K={k} T={t}");
            assert!((q - bs_put(100.0, k, t, 0.05, 0.2)).abs() < 1e-8, "put K={k} T={t}");
        }
    }
}

#[test]
fn merton_limit() {
    let p = ModelParams::merton(0.2, 0.05, 0.1, -0.1, 0.15);
    assert!((price(&OptionContract::call(100.0, 100.0, 1.0), &p) - MERTON_CALL).abs() < 1e-8);
    for k in [80.0, 120.0] {
        let exact = merton_call(100.0, k, 0.5, 0.05, 0.2, 0.1, -0.1, 0.15, 50);
        assert!((price(&OptionContract::call(100.0, k, 0.5), &p) - exact).abs() < 1e-8);
    }
}

#[test]
fn talbot_recovers_mittag_leffler_densities() {
    for (beta, exact) in [(0.65, LAPLACE_ML_065), (0.35, LAPLACE_ML_035)] {
        let v = invert_laplace_talbot(|s: Complex64| 1.0 / (s.powf(beta) + 2.0), 0.5, 32).unwrap();
        assert!((v - exact).abs() < 1e-8, "beta {beta}: {v} vs {exact}");
    }
}

#[test]
fn parity_uses_model_discount() {
    let p = ModelParams::reference(0.03);
    let cfg = TransformConfig::default();
    for (k, t) in [(3800.0, 0.25), (4200.0, 0.5), (5000.0, 0.9)] {
        let c = price(&OptionContract::call(4200.0, k, t), &p);
        let q = price(&OptionContract::put(4200.0, k, t), &p);
        let d = model_discount(&p, t, &cfg).unwrap();
        assert!((c - q - (4200.0 - k * d)).abs() < 1e-6 * 4200.0);
    }
}

#[test]
fn doubling_check_is_reported() {
    let p = ModelParams::reference(0.02);
    let r = price_european_transform(&OptionContract::call(4050.0, 4200.0, 0.5), &p, &TransformConfig::default()).unwrap();
    let Diagnostics::Transform(d) = r.diagnostics else { panic!() };
    assert!(d.doubling_change.unwrap() < 1e-6 * 4050.0);
    assert!(!d.capped);
}

#[test]
fn strip_matches_single_prices() {
    let p = ModelParams::reference(0.03);
    let strikes = [3800.0, 4200.0, 4600.0];
    let strip = price_strip(&p, OptionKind::Call, 4200.0, &strikes, 0.5, &TransformConfig::default()).unwrap();
    for (k, v) in strikes.iter().zip(strip) {
        assert!((price(&OptionContract::call(4200.0, *k, 0.5), &p) - v).abs() < 1e-6 * 4200.0);
    }
}

#[test]
fn model_prices_exceed_black_scholes_increasingly_with_strike() {
    let p = ModelParams::reference(0.03);
    let strikes = [3800.0, 4200.0, 4600.0, 5000.0];
    let model = price_strip(&p, OptionKind::Call, 4200.0, &strikes, 0.5, &TransformConfig::default()).unwrap();
    let rel: Vec<f64> = strikes
        .iter()
        .zip(&model)
        .map(|(k, v)| v / bs_call(4200.0, *k, 0.5, 0.03, 0.14) - 1.0)
        .collect();
    assert!(rel[0] > 0.0);
    assert!(rel.windows(2).all(|w| w[1] > w[0]), "{rel:?}");
}

fn params_strategy() -> impl Strategy<Value = ModelParams> {
    (0.1..0.4f64, 0.0..0.2f64, 0.2..0.8f64, 0.0..1.5f64, -0.15..0.05f64, 0.05..0.25f64).prop_map(
        |(s0, sh, h, l, m, sy)| ModelParams {
            sigma0: s0,
            sigma_h: sh,
            hurst: h,
            lambda: l,
            mu_y: m,
            sigma_y: sy,
            rate: 0.03,
            mu: 0.03,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn calls_are_bounded_decreasing_and_convex(p in params_strategy(), t in 0.1..1.0f64) {
        let strikes = [85.0, 95.0, 100.0, 105.0, 115.0];
        let cfg = TransformConfig::fast();
        let v = price_strip(&p, OptionKind::Call, 100.0, &strikes, t, &cfg).unwrap();
        let d = model_discount(&p, t, &cfg).unwrap();
        for (k, c) in strikes.iter().zip(&v) {
            prop_assert!(*c <= 100.0 + 1e-9);
            prop_assert!(*c >= (100.0 - k * d).max(0.0) - 1e-6);
        }
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        for i in 1..strikes.len() - 1 {
            let (a, b) = (strikes[i] - strikes[i - 1], strikes[i + 1] - strikes[i]);
            let slope_l = (v[i] - v[i - 1]) / a;
            let slope_r = (v[i + 1] - v[i]) / b;
            prop_assert!(slope_r >= slope_l - 1e-7);
        }
    }

    #[test]
    fn put_call_parity_holds(p in params_strategy(), k in 80.0..120.0f64, t in 0.1..1.0f64) {
        let cfg = TransformConfig::fast();
        let c = price_strip(&p, OptionKind::Call, 100.0, &[k], t, &cfg).unwrap()[0];
        let q = price_strip(&p, OptionKind::Put, 100.0, &[k], t, &cfg).unwrap()[0];
        let d = model_discount(&p, t, &cfg).unwrap();
        // the strip clamps at zero, so only test where both legs are positive
        prop_assume!(c > 1e-6 && q > 1e-6);
        prop_assert!((c - q - (100.0 - k * d)).abs() < 1e-5);
    }
}
