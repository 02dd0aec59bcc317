use smfj::measure::{emm_drift, esscher_root, jump_kappa, GaussianJumps, MeasureShift};
use smfj::process::{simulate_paths, smfbm_covariance, PathSimulator, SimMeasure};
use smfj::ModelParams;

#[test]
fn esscher_root_neutralises_jump_drift() {
    for (mu, s) in [(-0.04, 0.11), (0.1, 0.3), (-0.3, 0.05)] {
        let eta = esscher_root(mu, s).unwrap();
        let law = GaussianJumps { mu, sigma: s };
        assert!((law.mgf(eta + 1.0) - law.mgf(eta)).abs() < 1e-12 * law.mgf(eta));
        assert!((eta - (-mu / (s * s) - 0.5)).abs() < 1e-9);
    }
    assert_eq!(esscher_root(0.0, 0.0).unwrap(), 0.0);
    assert!(esscher_root(0.1, 0.0).is_err());
}

#[test]
fn canonical_measure_keeps_physical_drift() {
    let mut p = ModelParams::reference(0.02);
    p.mu = 0.07;
    let shift = MeasureShift::canonical(&p, 1.0).unwrap();
    assert!((emm_drift(&p, &shift) - 0.07).abs() < 1e-12);
    let neutral = MeasureShift::neutral(&p, 1.0).unwrap();
    let expect = 0.02 + 0.85 * jump_kappa(-0.04, 0.11);
    assert!((emm_drift(&p, &neutral) - expect).abs() < 1e-12);
}

/// Sample covariance of the simulated log-price against the analytic one.
#[test]
fn simulated_covariance_matches_model() {
    let p = ModelParams::reference(0.0);
    let n = 40_000;
    let paths = simulate_paths(&p, 1.0, 1.0, 4, n, 11, SimMeasure::Physical).unwrap();
    let times = paths[0].times.clone();
    for (a, b) in [(2usize, 4usize), (4, 4), (1, 3)] {
        let xa: Vec<f64> = paths.iter().map(|q| q.log_prices[a]).collect();
        let xb: Vec<f64> = paths.iter().map(|q| q.log_prices[b]).collect();
        let (ma, mb) = (xa.iter().sum::<f64>() / n as f64, xb.iter().sum::<f64>() / n as f64);
        let cov: f64 = xa.iter().zip(&xb).map(|(u, v)| (u - ma) * (v - mb)).sum::<f64>() / (n - 1) as f64;
        let exact = smfbm_covariance(times[a], times[b], &p);
        // sampling error of a covariance is about sqrt(2/n) relative
        assert!((cov / exact - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "({a},{b}): {cov} vs {exact}");
    }
}

#[test]
fn jump_counts_follow_the_intensity() {
    let p = ModelParams::reference(0.0);
    let paths = simulate_paths(&p, 1.0, 2.0, 8, 20_000, 5, SimMeasure::Physical).unwrap();
    let mean = paths.iter().map(|q| q.jump_count as f64).sum::<f64>() / paths.len() as f64;
    let se = (0.85 * 2.0 / paths.len() as f64).sqrt();
    assert!((mean - 1.7).abs() < 4.0 * se, "{mean}");
    for q in &paths {
        assert!(q.jumps_so_far.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*q.jumps_so_far.last().unwrap(), q.jump_count);
    }
}

#[test]
fn paths_do_not_depend_on_batching_or_threads() {
    let p = ModelParams::reference(0.02);
    let sim = PathSimulator::new(&p, 100.0, 1.0, 16, 9, SimMeasure::Physical).unwrap();
    let all: Vec<_> = sim.paths(600).collect();
    let later = sim.batch(300, 10);
    for i in 0..10 {
        assert_eq!(later.column(&later.log_prices, i), all[300 + i].log_prices.as_slice());
    }
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_paths(&p, 100.0, 1.0, 16, 600, 9, SimMeasure::Physical).unwrap())
    };
    assert_eq!(run(1), run(4));
    assert_eq!(run(1), all);
}

#[test]
fn classical_limit_has_brownian_variance() {
    let p = ModelParams::black_scholes(0.25, 0.0);
    let paths = simulate_paths(&p, 1.0, 1.0, 1, 50_000, 3, SimMeasure::Physical).unwrap();
    let x: Vec<f64> = paths.iter().map(|q| q.log_prices[1]).collect();
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let v = x.iter().map(|u| (u - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
    assert!((v / 0.0625 - 1.0).abs() < 0.03);
    assert!((m + 0.5 * 0.0625).abs() < 4.0 * (0.0625 / x.len() as f64).sqrt());
}
