use smfj::closed_form::bs_call;
use smfj::measure::RiskNeutralMode;
use smfj::montecarlo::{bs_barrier_analytic, discounted_means, price_mc, ControlVariate, McConfig};
use smfj::process::gaussian_variance;
use smfj::{Diagnostics, ModelParams, OptionContract};

fn barrier_setup() -> (OptionContract, ModelParams) {
    (
        OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5),
        ModelParams::reference(0.02),
    )
}

#[test]
fn black_scholes_call_within_three_standard_errors() {
    let p = ModelParams::black_scholes(0.2, 0.05);
    let cfg = McConfig {
        n_paths: 1_000_000,
        ..Default::default()
    };
    let r = price_mc(&OptionContract::call(100.0, 100.0, 1.0), &p, &cfg).unwrap();
    let se = r.std_err.unwrap();
    let exact = bs_call(100.0, 100.0, 1.0, 0.05, 0.2);
    assert!((exact - 10.4506).abs() < 1e-4);
    assert!((r.price - exact).abs() < 3.0 * se, "{} vs {exact} (se {se})", r.price);
}

#[test]
fn barrier_at_or_above_spot_is_worthless() {
    let (_, p) = barrier_setup();
    for b in [4050.0, 4100.0] {
        let c = OptionContract::down_and_out_call(4050.0, 4200.0, b, 0.5);
        assert_eq!(price_mc(&c, &p, &McConfig::default()).unwrap().price, 0.0);
    }
}

#[test]
fn discounted_price_is_a_martingale() {
    let p = ModelParams::reference(0.02);
    for mode in [RiskNeutralMode::Naive, RiskNeutralMode::Tilted] {
        let rows = discounted_means(&p, 100.0, 1.0, 4, 100_000, 7, mode).unwrap();
        for (t, mean, se) in rows {
            assert!((mean - 100.0).abs() <= 3.0 * se, "{mode:?} t={t}: {mean} ± {se}");
        }
    }
}

#[test]
fn estimate_is_independent_of_thread_count() {
    let (c, p) = barrier_setup();
    let cfg = McConfig {
        n_paths: 3000,
        control_variate: ControlVariate::BsBarrierAnalytic,
        ..Default::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| price_mc(&c, &p, &cfg).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.price.to_bits(), b.price.to_bits());
    assert_eq!(a.std_err, b.std_err);
}

#[test]
fn put_call_parity_within_combined_error() {
    let p = ModelParams::reference(0.02);
    let cfg = McConfig {
        n_paths: 200_000,
        antithetic: true,
        ..Default::default()
    };
    for k in [90.0, 100.0, 115.0] {
        let call = price_mc(&OptionContract::call(100.0, k, 0.75), &p, &cfg).unwrap();
        let put = price_mc(&OptionContract::put(100.0, k, 0.75), &p, &cfg).unwrap();
        let forward = 100.0 - k * (-0.02f64 * 0.75).exp();
        let se = call.std_err.unwrap().hypot(put.std_err.unwrap());
        assert!((call.price - put.price - forward).abs() <= 3.0 * se, "K={k}");
    }
}

#[test]
fn control_variates_reduce_standard_error() {
    let (c, p) = barrier_setup();
    let base = McConfig {
        n_paths: 20_000,
        ..Default::default()
    };
    let plain = price_mc(&c, &p, &base).unwrap();
    let se_plain = plain.std_err.unwrap();
    let mut last = plain.price;
    for (cv, floor) in [
        (ControlVariate::BsBarrierAnalytic, 0.10),
        (ControlVariate::BsBarrierAndForward, 0.20),
    ] {
        let r = price_mc(&c, &p, &McConfig { control_variate: cv, ..base }).unwrap();
        let se = r.std_err.unwrap();
        assert!(1.0 - se / se_plain >= floor, "{cv:?}: {se} vs {se_plain}");
        assert!((r.price - plain.price).abs() < 3.0 * se_plain);
        let Diagnostics::MonteCarlo(d) = &r.diagnostics else { panic!() };
        assert_eq!(d.plain_se, se_plain);
        last = r.price;
    }
    assert!(last > 0.0);
}

#[test]
fn control_mean_is_the_analytic_barrier_price() {
    let (c, p) = barrier_setup();
    let sigma = (gaussian_variance(0.5, &p) / 0.5).sqrt();
    let r = price_mc(
        &c,
        &p,
        &McConfig {
            n_paths: 1000,
            control_variate: ControlVariate::BsBarrierAnalytic,
            ..Default::default()
        },
    )
    .unwrap();
    let Diagnostics::MonteCarlo(d) = r.diagnostics else { panic!() };
    assert_eq!(d.control_mean, Some(bs_barrier_analytic(&c, sigma, 0.02).unwrap()));
}

#[test]
fn bridge_correction_lowers_barrier_price() {
    let (c, p) = barrier_setup();
    let base = McConfig {
        n_paths: 5000,
        steps_per_year: 100,
        ..Default::default()
    };
    let plain = price_mc(&c, &p, &base).unwrap().price;
    let bridged = price_mc(&c, &p, &McConfig { bridge_correction: true, ..base }).unwrap().price;
    assert!(bridged < plain);
}

#[test]
fn invalid_configurations_are_rejected() {
    let (c, p) = barrier_setup();
    assert!(price_mc(&c, &p, &McConfig { n_paths: 10, ..Default::default() }).is_err());
    assert!(price_mc(&c, &p, &McConfig { n_paths: 1001, antithetic: true, ..Default::default() }).is_err());
    let euro = OptionContract::call(100.0, 100.0, 1.0);
    let cv = McConfig {
        control_variate: ControlVariate::BsBarrierAnalytic,
        ..Default::default()
    };
    assert!(price_mc(&euro, &p, &cv).is_err());
}
