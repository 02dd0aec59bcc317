//! Closed-form benchmarks: Black-Scholes, Merton series, continuous barrier.

use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn d1_d2(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> (f64, f64) {
    let st = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / st;
    (d1, d1 - st)
}

pub fn bs_call(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> f64 {
    if sigma * t.sqrt() < 1e-12 {
        return (s - k * (-r * t).exp()).max(0.0);
    }
    let (d1, d2) = d1_d2(s, k, t, r, sigma);
    s * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
}

pub fn bs_put(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> f64 {
    bs_call(s, k, t, r, sigma) - s + k * (-r * t).exp()
}

/// Call sensitivities in the Black-Scholes model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BsGreeks {
    pub delta: f64,
    pub gamma: f64,
    pub vega: f64,
    pub vanna: f64,
}

pub fn bs_call_greeks(s: f64, k: f64, t: f64, r: f64, sigma: f64) -> BsGreeks {
    let (d1, d2) = d1_d2(s, k, t, r, sigma);
    let st = sigma * t.sqrt();
    BsGreeks {
        delta: norm_cdf(d1),
        gamma: norm_pdf(d1) / (s * st),
        vega: s * norm_pdf(d1) * t.sqrt(),
        vanna: -norm_pdf(d1) * d2 / sigma,
    }
}

/// Merton jump-diffusion call as a Poisson mixture of Black-Scholes prices.
pub fn merton_call(
    s: f64,
    k: f64,
    t: f64,
    r: f64,
    sigma: f64,
    lambda: f64,
    mu_y: f64,
    sigma_y: f64,
    terms: usize,
) -> f64 {
    let kappa = (mu_y + 0.5 * sigma_y * sigma_y).exp() - 1.0;
    let lp = lambda * (1.0 + kappa);
    let mut weight = (-lp * t).exp();
    let mut total = 0.0;
    for n in 0..terms {
        if n > 0 {
            weight *= lp * t / n as f64;
        }
        let nf = n as f64;
        let sn = (sigma * sigma + nf * sigma_y * sigma_y / t).sqrt();
        let rn = r - lambda * kappa + nf * (1.0 + kappa).ln() / t;
        total += weight * bs_call(s, k, t, rn, sn);
    }
    total
}

pub fn merton_put(
    s: f64,
    k: f64,
    t: f64,
    r: f64,
    sigma: f64,
    lambda: f64,
    mu_y: f64,
    sigma_y: f64,
    terms: usize,
) -> f64 {
    merton_call(s, k, t, r, sigma, lambda, mu_y, sigma_y, terms) - s + k * (-r * t).exp()
}

/// Continuously monitored down-and-out call under geometric Brownian motion,
/// for a barrier at or below the strike.
pub fn bs_down_and_out_call(s: f64, k: f64, b: f64, t: f64, r: f64, sigma: f64) -> f64 {
    if s <= b {
        return 0.0;
    }
    let st = sigma * t.sqrt();
    let lam = (r + 0.5 * sigma * sigma) / (sigma * sigma);
    let y = (b * b / (s * k)).ln() / st + lam * st;
    let down_in = s * (b / s).powf(2.0 * lam) * norm_cdf(y)
        - k * (-r * t).exp() * (b / s).powf(2.0 * lam - 2.0) * norm_cdf(y - st);
    (bs_call(s, k, t, r, sigma) - down_in).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn black_scholes_reference() {
        assert!((bs_call(100.0, 100.0, 1.0, 0.05, 0.2) - 10.450_583_572_185_565).abs() < 1e-9);
        let p = bs_put(100.0, 100.0, 1.0, 0.05, 0.2);
        assert!((p - 5.573_526_022_256_971).abs() < 1e-9);
    }

    #[test]
    fn merton_reduces_to_bs_without_jumps() {
        let m = merton_call(100.0, 95.0, 0.7, 0.03, 0.25, 0.0, -0.1, 0.2, 50);
        assert!((m - bs_call(100.0, 95.0, 0.7, 0.03, 0.25)).abs() < 1e-12);
    }

    #[test]
    fn barrier_limits() {
        let v = bs_call(4050.0, 4200.0, 0.5, 0.02, 0.14);
        assert!((bs_down_and_out_call(4050.0, 4200.0, 1e-6, 0.5, 0.02, 0.14) - v).abs() < 1e-9);
        assert_eq!(bs_down_and_out_call(3800.0, 4200.0, 3800.0, 0.5, 0.02, 0.14), 0.0);
    }
}
