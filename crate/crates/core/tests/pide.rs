mod common;

use common::BARRIER_DAO;
use smfj::closed_form::{bs_call, merton_call};
use smfj::pide::{
    convergence_study, default_grid, solve_layers, solve_pide, solve_pide_with, sqrt_ladder, GridSpec, HistoryMode,
    PideConfig,
};
use smfj::transform::{price_european_transform, TransformConfig};
use smfj::{Diagnostics, ModelParams, OptionContract};

fn pide_price(c: &OptionContract, p: &ModelParams, ns: usize, nt: usize) -> (f64, f64) {
    let r = solve_pide(c, p, &default_grid(c, p, ns, nt).unwrap()).unwrap();
    let Diagnostics::Pide(d) = r.diagnostics else { panic!() };
    (r.price, d.stability_constant())
}

#[test]
fn black_scholes_limit() {
    let p = ModelParams::black_scholes(0.2, 0.05);
    for (k, t) in [(90.0, 0.5), (100.0, 1.0), (110.0, 1.5)] {
        let (v, _) = pide_price(&OptionContract::call(100.0, k, t), &p, 300, 300);
        let exact = bs_call(100.0, k, t, 0.05, 0.2);
        assert!((v / exact - 1.0).abs() < 2e-3, "K={k} T={t}: {v} vs {exact}");
    }
}

#[test]
fn merton_limit() {
    let p = ModelParams::merton(0.2, 0.05, 0.1, -0.1, 0.15);
    let (v, _) = pide_price(&OptionContract::call(100.0, 100.0, 1.0), &p, 300, 300);
    let exact = merton_call(100.0, 100.0, 1.0, 0.05, 0.2, 0.1, -0.1, 0.15, 50);
    assert!((v / exact - 1.0).abs() < 2e-3, "{v} vs {exact}");
}

#[test]
fn agrees_with_transform_on_the_full_model() {
    let p = ModelParams::reference(0.02);
    let c = OptionContract::call(4050.0, 4200.0, 0.5);
    let exact = price_european_transform(&c, &p, &TransformConfig::default()).unwrap().price;
    let (v, stab) = pide_price(&c, &p, 200, 250);
    assert!((v / exact - 1.0).abs() < 3e-3, "{v} vs {exact}");
    assert!(stab <= (0.02f64 * 0.5).exp() + 1.0);
}

#[test]
fn barrier_black_scholes_limit() {
    let p = ModelParams::black_scholes(0.14, 0.02);
    let c = OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5);
    let (v, stab) = pide_price(&c, &p, 400, 500);
    assert!((v / BARRIER_DAO - 1.0).abs() < 5e-3, "{v} vs {BARRIER_DAO}");
    assert!(stab <= (0.02f64 * 0.5).exp() + 1.0);
}

#[test]
fn barrier_is_below_vanilla_and_vanishes_at_the_barrier() {
    let p = ModelParams::reference(0.02);
    let c = OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5);
    let g = default_grid(&c, &p, 200, 200).unwrap();
    let sol = solve_layers(&c, &p, &g, &PideConfig::default()).unwrap();
    assert_eq!(sol.values[0], 0.0);
    let vanilla = OptionContract::call(4050.0, 4200.0, 0.5);
    let (v, _) = pide_price(&vanilla, &p, 200, 200);
    assert!(sol.value_at(4050.0) < v);
    assert!(sol.values.iter().all(|x| *x >= -1e-8));
    let knocked = OptionContract::down_and_out_call(3700.0, 4200.0, 3800.0, 0.5);
    assert_eq!(solve_pide(&knocked, &p, &g).unwrap().price, 0.0);
}

#[test]
fn fft_history_reproduces_direct_sum() {
    let p = ModelParams::reference(0.02);
    let c = OptionContract::call(100.0, 100.0, 0.5);
    let g = default_grid(&c, &p, 120, 300).unwrap();
    let direct = solve_pide_with(&c, &p, &g, &PideConfig::default()).unwrap().price;
    let fft = solve_pide_with(
        &c,
        &p,
        &g,
        &PideConfig {
            history: HistoryMode::Fft { block: 32 },
            ..Default::default()
        },
    )
    .unwrap()
    .price;
    assert!((direct - fft).abs() < 1e-9 * direct);
}

#[test]
fn stability_monitor_on_a_range_of_models() {
    for (p, c) in [
        (ModelParams::reference(0.05), OptionContract::put(100.0, 110.0, 1.0)),
        (
            ModelParams {
                hurst: 0.8,
                sigma_h: 0.3,
                ..ModelParams::reference(0.01)
            },
            OptionContract::call(100.0, 90.0, 2.0),
        ),
    ] {
        let (_, stab) = pide_price(&c, &p, 150, 150);
        assert!(stab <= (p.rate * c.maturity).exp() + 1.0, "{stab}");
    }
}

#[test]
fn errors_shrink_under_refinement() {
    let p = ModelParams::reference(0.02);
    let c = OptionContract::call(100.0, 100.0, 0.5);
    let cfg = TransformConfig::default();
    let rep = convergence_study(&c, &p, &sqrt_ladder(0.05, 4), |s| {
        Ok(price_european_transform(&c.with_spot(s), &p, &cfg)?.price)
    })
    .unwrap();
    assert!(rep.rows.windows(2).all(|w| w[1].error < w[0].error), "{rep:?}");
    assert!(rep.slope > 0.5);
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(GridSpec::uniform(1.0, 0.0, 10, 10, 1.0).is_err());
    assert!(GridSpec::uniform(0.0, 1.0, 2, 10, 1.0).is_err());
    let p = ModelParams::reference(0.02);
    let c = OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5);
    let g = GridSpec::uniform(7.0, 9.0, 50, 50, 0.5).unwrap();
    assert!(solve_layers(&c, &p, &g, &PideConfig::default()).is_err());
}
