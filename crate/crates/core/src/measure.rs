//! Risk-neutral measure: Esscher tilt of the jump law, jump compensator and
//! the drift condition that makes discounted prices martingales.

use crate::error::{invalid, Error, Result};
use crate::model::ModelParams;
use crate::quadrature::gauss_legendre;
use crate::specialfn::gamma;

/// Log-normal jump sizes `Y ~ N(μ_Y, σ_Y²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianJumps {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianJumps {
    pub fn log_mgf(&self, eta: f64) -> f64 {
        self.mu * eta + 0.5 * self.sigma * self.sigma * eta * eta
    }

    pub fn mgf(&self, eta: f64) -> f64 {
        self.log_mgf(eta).exp()
    }

    /// Law after exponential tilting by `e^{ηY}`.
    pub fn tilted(&self, eta: f64) -> Self {
        Self {
            mu: self.mu + eta * self.sigma * self.sigma,
            sigma: self.sigma,
        }
    }
}

/// `κ = E[e^Y] − 1` for Gaussian log-jumps.
pub fn jump_kappa(mu_y: f64, sigma_y: f64) -> f64 {
    (mu_y + 0.5 * sigma_y * sigma_y).exp_m1()
}

/// Root η* of `E[e^{(η+1)Y}] = E[e^{ηY}]`, found numerically and checked
/// against the Gaussian closed form `−μ/σ² − ½`.
pub fn esscher_root(mu_y: f64, sigma_y: f64) -> Result<f64> {
    if sigma_y < 0.0 || !sigma_y.is_finite() || !mu_y.is_finite() {
        return Err(invalid("sigma_y", "must be finite and non-negative"));
    }
    if sigma_y == 0.0 {
        return if mu_y == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::NoRoot(format!(
                "degenerate jump law at {mu_y} has no drift-neutral tilt"
            )))
        };
    }
    let law = GaussianJumps { mu: mu_y, sigma: sigma_y };
    // log M(η+1) − log M(η) is increasing in η; bracket then bisect
    let g = |eta: f64| law.log_mgf(eta + 1.0) - law.log_mgf(eta);
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut expand = 0;
    while g(lo) > 0.0 || g(hi) < 0.0 {
        lo *= 2.0;
        hi *= 2.0;
        expand += 1;
        if expand > 200 {
            return Err(Error::NoRoot("could not bracket the Esscher root".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * mid.abs().max(1.0) {
            break;
        }
    }
    let root = 0.5 * (lo + hi);
    let closed = -mu_y / (sigma_y * sigma_y) - 0.5;
    if (root - closed).abs() > 1e-10 * closed.abs().max(1.0) {
        return Err(Error::NoRoot(format!(
            "numeric root {root} disagrees with closed form {closed}"
        )));
    }
    let residual = law.mgf(root + 1.0) - law.mgf(root);
    if residual.abs() > 1e-12 * law.mgf(root).max(1.0) {
        return Err(Error::NoRoot(format!("residual {residual:e} too large")));
    }
    Ok(root)
}

/// Non-trivial root of the alternative condition `E[e^{(η+1)Y} − e^{ηY}] = κ`
/// (η = 0 always solves it), if one exists in a wide bracket.
pub fn alternate_esscher_root(mu_y: f64, sigma_y: f64) -> Option<f64> {
    if sigma_y <= 0.0 {
        return None;
    }
    let law = GaussianJumps { mu: mu_y, sigma: sigma_y };
    let kappa = jump_kappa(mu_y, sigma_y);
    let h = |eta: f64| law.mgf(eta + 1.0) - law.mgf(eta) - kappa;
    let grid: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.0125).collect();
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.abs() < 0.05 || b.abs() < 0.05 {
            continue;
        }
        let (fa, fb) = (h(a), h(b));
        if fa.is_finite() && fb.is_finite() && fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = h(mid);
                if fm * flo > 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
    }
    None
}

/// How the pricing measure treats the jump part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RiskNeutralMode {
    /// Original intensity and size law, drift `r − λκ`.
    #[default]
    Naive,
    /// Intensity `λ E[e^{η*Y}]` and tilted size law.
    Tilted,
}

/// Girsanov and Esscher data defining one equivalent martingale measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureShift {
    pub theta0: f64,
    /// Constant fractional price of risk.
    pub theta_h: f64,
    pub horizon: f64,
    pub eta_star: f64,
    pub kappa: f64,
    pub lambda_star: f64,
    pub alternate_root: Option<f64>,
}

impl MeasureShift {
    /// Canonical choice: `θ_H = 0` and θ₀ absorbing the whole diffusive premium,
    /// so that [`emm_drift`] returns the physical drift.
    pub fn canonical(params: &ModelParams, horizon: f64) -> Result<Self> {
        let kappa = jump_kappa(params.mu_y, params.sigma_y);
        let eta_star = if params.lambda > 0.0 {
            esscher_root(params.mu_y, params.sigma_y)?
        } else {
            0.0
        };
        let law = GaussianJumps {
            mu: params.mu_y,
            sigma: params.sigma_y,
        };
        let theta0 = if params.sigma0 > 0.0 {
            (params.rate + params.lambda * kappa - params.mu) / params.sigma0
        } else {
            0.0
        };
        Ok(Self {
            theta0,
            theta_h: 0.0,
            horizon,
            eta_star,
            kappa,
            lambda_star: params.lambda * law.mgf(eta_star),
            alternate_root: alternate_esscher_root(params.mu_y, params.sigma_y),
        })
    }

    /// Shift with zero prices of risk: the drift becomes `r + λκ`.
    pub fn neutral(params: &ModelParams, horizon: f64) -> Result<Self> {
        Ok(Self {
            theta0: 0.0,
            theta_h: 0.0,
            ..Self::canonical(params, horizon)?
        })
    }
}

/// `∫₀ᵀ θ_H(s) K_H(T, s) ds` with `K_H(T, s) = (T − s)^{H−½}/Γ(H+½)`.
///
/// The substitution `T − s = T v^{1/(H+½)}` removes the endpoint singularity;
/// Gauss-Legendre rules of two sizes must agree.
pub fn kernel_integral<F: Fn(f64) -> f64>(theta_h: F, hurst: f64, horizon: f64) -> f64 {
    let a = hurst + 0.5;
    let p = 1.0 / a;
    let eval = |n: usize| {
        gauss_legendre(n).integrate(0.0, 1.0, |v| theta_h(horizon * (1.0 - v.powf(p))))
    };
    let (coarse, fine) = (eval(16), eval(32));
    let body = if (coarse - fine).abs() <= 1e-12 * fine.abs().max(1.0) {
        fine
    } else {
        eval(64)
    };
    horizon.powf(a) * p * body / gamma(a)
}

/// Drift `μ = r + λκ − σ₀θ₀ − σ_H ∫θ_H K_H` making the discounted price a
/// martingale under the measure described by `shift`.
pub fn emm_drift(params: &ModelParams, shift: &MeasureShift) -> f64 {
    let kappa = jump_kappa(params.mu_y, params.sigma_y);
    let frac = if params.sigma_h > 0.0 && shift.theta_h != 0.0 {
        let th = shift.theta_h;
        params.sigma_h * kernel_integral(|_| th, params.hurst, shift.horizon)
    } else {
        0.0
    };
    params.rate + params.lambda * kappa - params.sigma0 * shift.theta0 - frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esscher_examples() {
        assert!((esscher_root(-0.04, 0.11).unwrap() - (0.04 / 0.0121 - 0.5)).abs() < 1e-10);
        assert!((esscher_root(-0.05, 0.25).unwrap() - 0.3).abs() < 1e-10);
        assert!(esscher_root(-0.02, 0.2).unwrap().abs() < 1e-10);
        assert!(matches!(esscher_root(0.1, 0.0), Err(Error::NoRoot(_))));
        assert_eq!(esscher_root(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(jump_kappa(0.0, 0.0), 0.0);
        assert!((jump_kappa(-0.04, 0.11) - (-0.03395f64).exp_m1()).abs() < 1e-15);
        assert!((jump_kappa(-0.04, 0.11) + 0.033380).abs() < 5e-7);
        assert!((jump_kappa(-0.05, 0.25) + 0.018575).abs() < 5e-7);
    }

    #[test]
    fn drift_examples() {
        let mut p = ModelParams::black_scholes(0.2, 0.02);
        let shift = MeasureShift::neutral(&p, 1.0).unwrap();
        assert_eq!(emm_drift(&p, &shift), 0.02);
        p.lambda = 0.85;
        p.mu_y = -0.04;
        p.sigma_y = 0.11;
        let shift = MeasureShift::neutral(&p, 1.0).unwrap();
        assert!((emm_drift(&p, &shift) - (0.02 + 0.85 * jump_kappa(-0.04, 0.11))).abs() < 1e-15);
        assert!((emm_drift(&p, &shift) + 0.008373).abs() < 1e-6);
    }

    #[test]
    fn canonical_shift_reproduces_physical_drift() {
        let mut p = ModelParams::reference(0.02);
        p.mu = 0.07;
        let shift = MeasureShift::canonical(&p, 0.5).unwrap();
        assert!((emm_drift(&p, &shift) - 0.07).abs() < 1e-14);
        assert_eq!(shift.theta_h, 0.0);
    }

    #[test]
    fn kernel_integral_matches_closed_form() {
        for &h in &[0.2, 0.35, 0.5, 0.8] {
            let t: f64 = 0.75;
            let exact = t.powf(h + 0.5) / ((h + 0.5) * gamma(h + 0.5));
            assert!((kernel_integral(|_| 1.0, h, t) - exact).abs() < 1e-13);
        }
    }
}
