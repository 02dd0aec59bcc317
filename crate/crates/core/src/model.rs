//! Market model, contracts and pricing results.

use crate::error::{invalid, Result};
use crate::scalar::Real;
use std::fmt;
use std::str::FromStr;

/// Hurst values at or below this are treated as the classical (integer order) limit.
pub const CLASSICAL_HURST: f64 = 1e-9;

/// Model parameters `(σ₀, σ_H, H, λ, μ_Y, σ_Y)` plus the short rate and the
/// physical drift. Generic so the pricers can run on dual numbers; the Hurst
/// index fixes the discretisation and stays a plain float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<T = f64> {
    pub sigma0: T,
    pub sigma_h: T,
    pub hurst: f64,
    pub lambda: T,
    pub mu_y: T,
    pub sigma_y: T,
    pub rate: T,
    pub mu: T,
}

impl ModelParams<f64> {
    /// Pure Black-Scholes dynamics.
    pub fn black_scholes(sigma0: f64, rate: f64) -> Self {
        Self {
            sigma0,
            sigma_h: 0.0,
            hurst: 0.0,
            lambda: 0.0,
            mu_y: 0.0,
            sigma_y: 0.0,
            rate,
            mu: rate,
        }
    }

    /// Merton jump-diffusion (no fractional component).
    pub fn merton(sigma0: f64, rate: f64, lambda: f64, mu_y: f64, sigma_y: f64) -> Self {
        Self {
            lambda,
            mu_y,
            sigma_y,
            ..Self::black_scholes(sigma0, rate)
        }
    }

    /// The calibrated reference parameter set used throughout the examples:
    /// σ₀ = 0.14, σ_H = 0.10, H = 0.35, λ = 0.85, Y ~ N(−0.04, 0.11²).
    pub fn reference(rate: f64) -> Self {
        Self {
            sigma0: 0.14,
            sigma_h: 0.10,
            hurst: 0.35,
            lambda: 0.85,
            mu_y: -0.04,
            sigma_y: 0.11,
            rate,
            mu: rate,
        }
    }

    /// Lift every field to a (constant) generic scalar.
    pub fn lift<T: Real>(&self) -> ModelParams<T> {
        ModelParams {
            sigma0: T::cst(self.sigma0),
            sigma_h: T::cst(self.sigma_h),
            hurst: self.hurst,
            lambda: T::cst(self.lambda),
            mu_y: T::cst(self.mu_y),
            sigma_y: T::cst(self.sigma_y),
            rate: T::cst(self.rate),
            mu: T::cst(self.mu),
        }
    }
}

impl<T: Real> ModelParams<T> {
    pub fn values(&self) -> ModelParams<f64> {
        ModelParams {
            sigma0: self.sigma0.val(),
            sigma_h: self.sigma_h.val(),
            hurst: self.hurst,
            lambda: self.lambda.val(),
            mu_y: self.mu_y.val(),
            sigma_y: self.sigma_y.val(),
            rate: self.rate.val(),
            mu: self.mu.val(),
        }
    }

    pub fn is_classical(&self) -> bool {
        self.hurst <= CLASSICAL_HURST
    }

    /// Order of the time derivative, `1 − β` with `β = 1 − H`; the classical
    /// limit switches to a first-order derivative.
    pub fn time_order(&self) -> f64 {
        if self.is_classical() {
            1.0
        } else {
            self.hurst
        }
    }

    /// Expected relative jump size `κ = E[e^Y] − 1`.
    pub fn kappa(&self) -> T {
        (self.mu_y + self.sigma_y * self.sigma_y * T::cst(0.5)).exp() - T::one()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        let finite = [v.sigma0, v.sigma_h, v.hurst, v.lambda, v.mu_y, v.sigma_y, v.rate, v.mu];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(invalid("params", "non-finite entry"));
        }
        if v.sigma0 < 0.0 {
            return Err(invalid("sigma0", "must be non-negative"));
        }
        if v.sigma_h < 0.0 {
            return Err(invalid("sigma_h", "must be non-negative"));
        }
        if v.sigma0 == 0.0 && v.sigma_h == 0.0 {
            return Err(invalid("sigma0", "sigma0 and sigma_h cannot both vanish"));
        }
        if !(0.0..1.0).contains(&v.hurst) {
            return Err(invalid("hurst", format!("{} outside [0, 1)", v.hurst)));
        }
        if self.is_classical() && v.sigma_h > 0.0 {
            return Err(invalid("hurst", "sigma_h > 0 requires hurst > 0"));
        }
        if v.lambda < 0.0 {
            return Err(invalid("lambda", "must be non-negative"));
        }
        if v.sigma_y < 0.0 {
            return Err(invalid("sigma_y", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
    DownAndOutCall,
}

impl FromStr for OptionKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "call" | "european_call" => Ok(Self::Call),
            "put" | "european_put" => Ok(Self::Put),
            "down_and_out_call" | "dao_call" => Ok(Self::DownAndOutCall),
            other => Err(format!("unknown option kind `{other}`")),
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Call => "call",
            Self::Put => "put",
            Self::DownAndOutCall => "down_and_out_call",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptionContract {
    pub kind: OptionKind,
    pub strike: f64,
    pub barrier: Option<f64>,
    pub maturity: f64,
    pub spot: f64,
}

impl OptionContract {
    pub fn call(spot: f64, strike: f64, maturity: f64) -> Self {
        Self {
            kind: OptionKind::Call,
            strike,
            barrier: None,
            maturity,
            spot,
        }
    }

    pub fn put(spot: f64, strike: f64, maturity: f64) -> Self {
        Self {
            kind: OptionKind::Put,
            ..Self::call(spot, strike, maturity)
        }
    }

    pub fn down_and_out_call(spot: f64, strike: f64, barrier: f64, maturity: f64) -> Self {
        Self {
            kind: OptionKind::DownAndOutCall,
            barrier: Some(barrier),
            ..Self::call(spot, strike, maturity)
        }
    }

    pub fn with_spot(mut self, spot: f64) -> Self {
        self.spot = spot;
        self
    }

    pub fn is_european(&self) -> bool {
        matches!(self.kind, OptionKind::Call | OptionKind::Put)
    }

    pub fn payoff(&self, s: f64) -> f64 {
        match self.kind {
            OptionKind::Call | OptionKind::DownAndOutCall => (s - self.strike).max(0.0),
            OptionKind::Put => (self.strike - s).max(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(invalid("spot", "must be positive"));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(invalid("strike", "must be positive"));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) {
            return Err(invalid("maturity", "must be positive"));
        }
        match (self.kind, self.barrier) {
            (OptionKind::DownAndOutCall, None) => Err(invalid("barrier", "required for barrier contracts")),
            (OptionKind::DownAndOutCall, Some(b)) if !(b > 0.0 && b < self.strike) => {
                Err(invalid("barrier", "must satisfy 0 < B < K"))
            }
            (OptionKind::Call | OptionKind::Put, Some(_)) => {
                Err(invalid("barrier", "only down-and-out contracts carry a barrier"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Transform,
    Pide,
    MonteCarlo,
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "transform" => Ok(Self::Transform),
            "pide" => Ok(Self::Pide),
            "mc" | "montecarlo" => Ok(Self::MonteCarlo),
            other => Err(format!("unknown method `{other}` (expected transform, pide or mc)")),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Transform => "transform",
            Self::Pide => "pide",
            Self::MonteCarlo => "mc",
        })
    }
}

/// Method-specific run information attached to a price.
#[derive(Clone, Debug)]
pub enum Diagnostics {
    Transform(crate::transform::TransformDiagnostics),
    Pide(crate::pide::SolveDiagnostics),
    MonteCarlo(crate::montecarlo::McDiagnostics),
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Transform(d) => d.fmt(f),
            Self::Pide(d) => d.fmt(f),
            Self::MonteCarlo(d) => d.fmt(f),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PricingResult {
    pub price: f64,
    pub std_err: Option<f64>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Pricing route for European quotes and sensitivities. The PIDE variant
/// builds its default grid from the base contract.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pricer {
    Transform(crate::transform::TransformConfig),
    Pide { n_space: usize, n_time: usize },
}

impl Default for Pricer {
    fn default() -> Self {
        Self::Transform(crate::transform::TransformConfig::fast())
    }
}
