//! European prices by double transform inversion.
//!
//! In log-price `x` each exponential mode `e^{zx}` evolves independently under
//! the pricing equation. With time order `α` the mode amplitude after time `T`
//! is `m(T, z) = L⁻¹[s^{α−1}/(s^α − w(z))](T)` where
//! `w = ψ(z)/(1 − σ₀σ_H z)` and `ψ` is the characteristic exponent of the
//! generator. The Laplace inversion uses a Talbot contour; the Mellin
//! inversion integrates the payoff transform of `min(S, K)` along
//! `Re z = c ∈ (0, 1)` with Gauss-Legendre panels.

use crate::error::{invalid, Error, Result};
use crate::model::{Diagnostics, Method, ModelParams, OptionContract, OptionKind, PricingResult};
use crate::quadrature::{gauss_legendre, Rule};
use crate::scalar::Real;
use num_complex::{Complex, Complex64};
use std::f64::consts::PI;
use std::fmt;

/// Upper limit on the Mellin cutoff when the integrand decays slowly.
pub const MELLIN_CAP: f64 = 1e6;
/// Mode magnitudes beyond this mean the backward problem is ill-posed for the
/// parameters at hand.
pub const MODE_LIMIT: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformConfig {
    pub talbot_nodes: usize,
    pub mellin_line: f64,
    /// Fixed cutoff on the imaginary axis; adaptive when `None`.
    pub mellin_truncation: Option<f64>,
    /// Gauss-Legendre nodes per Mellin panel.
    pub mellin_nodes: usize,
    /// Envelope level at which the adaptive cutoff stops.
    pub tolerance: f64,
    /// Re-price with doubled node counts and fail if the change exceeds
    /// `1e−6·S₀`.
    pub verify: bool,
}

impl Default for TransformConfig {
    fn default() -> Self {
        Self {
            talbot_nodes: 16,
            mellin_line: 0.5,
            mellin_truncation: None,
            mellin_nodes: 16,
            tolerance: 1e-10,
            verify: true,
        }
    }
}

impl TransformConfig {
    /// Looser setting for objective evaluations inside calibration.
    pub fn fast() -> Self {
        Self {
            tolerance: 1e-7,
            mellin_nodes: 12,
            verify: false,
            ..Self::default()
        }
    }

    fn doubled(&self) -> Self {
        Self {
            talbot_nodes: 2 * self.talbot_nodes,
            mellin_nodes: 2 * self.mellin_nodes,
            verify: false,
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mellin_line > 0.0 && self.mellin_line < 1.0) {
            return Err(invalid("mellin_line", "must lie strictly inside (0, 1)"));
        }
        if self.talbot_nodes < 4 || self.talbot_nodes % 2 == 1 {
            return Err(invalid("talbot_nodes", "must be even and at least 4"));
        }
        if self.mellin_nodes < 2 {
            return Err(invalid("mellin_nodes", "must be at least 2"));
        }
        if let Some(u) = self.mellin_truncation {
            if !(u > 0.0 && u.is_finite()) {
                return Err(invalid("mellin_truncation", "must be positive"));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformDiagnostics {
    pub talbot_nodes: usize,
    pub mellin_nodes: usize,
    pub cutoff: f64,
    /// The cutoff hit [`MELLIN_CAP`] before the envelope test passed.
    pub capped: bool,
    pub max_mode: f64,
    pub discount: f64,
    pub doubling_change: Option<f64>,
}

impl fmt::Display for TransformDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "talbot_nodes={} mellin_nodes={} cutoff={:.4e} capped={} max_mode={:.4e} discount={:.12}",
            self.talbot_nodes, self.mellin_nodes, self.cutoff, self.capped, self.max_mode, self.discount
        )?;
        if let Some(c) = self.doubling_change {
            write!(f, " doubling_change={c:.3e}")?;
        }
        Ok(())
    }
}

fn lift<T: Real>(z: Complex64) -> Complex<T> {
    Complex::new(T::cst(z.re), T::cst(z.im))
}

fn val<T: Real>(z: Complex<T>) -> Complex64 {
    Complex64::new(z.re.val(), z.im.val())
}

/// Characteristic exponent `ψ(z)` of the generator acting on `e^{zx}`,
/// discounting included.
pub fn char_exponent<T: Real>(z: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    let half = T::cst(0.5);
    let one = Complex::new(T::one(), T::zero());
    let diffusion = (z * z - z) * (p.sigma0 * p.sigma0 * half);
    let drift = z * (p.rate - p.lambda * p.kappa());
    let jump = ((z * p.mu_y + z * z * (p.sigma_y * p.sigma_y * half)).exp() - one) * p.lambda;
    diffusion + drift + jump - one * p.rate
}

/// Effective exponent `w(z) = ψ(z)/(1 − σ₀σ_H z)`.
pub fn mode_exponent<T: Real>(z: Complex<T>, p: &ModelParams<T>) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    char_exponent(z, p) / (one - z * (p.sigma0 * p.sigma_h))
}

/// Denominator of the transformed price, `s^α(1 − σ₀σ_H z) − ψ(z)`.
/// In the classical limit this is `s − ψ(z)`.
pub fn transform_denominator(s: Complex64, z: Complex64, params: &ModelParams) -> Complex64 {
    let sa = if params.is_classical() { s } else { s.powf(params.time_order()) };
    sa * (1.0 - params.sigma0 * params.sigma_h * z) - char_exponent(z, params)
}

fn talbot_node(theta: f64, n: usize, tau: f64) -> (Complex64, Complex64) {
    const SIGMA: f64 = -0.6122;
    const MU: f64 = 0.5017;
    const ALPHA: f64 = 0.6407;
    const NU: f64 = 0.2645;
    let scale = n as f64 / tau;
    let cot = 1.0 / (ALPHA * theta).tan();
    let s = scale * Complex64::new(SIGMA + MU * theta * cot, NU * theta);
    let sin = (ALPHA * theta).sin();
    let ds = scale * Complex64::new(MU * cot - MU * ALPHA * theta / (sin * sin), NU);
    (s, ds)
}

fn talbot_nodes(n: usize, tau: f64) -> impl Iterator<Item = (Complex64, Complex64)> {
    (0..n).map(move |k| {
        let theta = -PI + (k as f64 + 0.5) * 2.0 * PI / n as f64;
        talbot_node(theta, n, tau)
    })
}

/// Real part of the inverse Laplace transform at `tau` on a Talbot contour
/// with midpoint nodes.
pub fn invert_laplace_talbot<F: Fn(Complex64) -> Complex64>(fhat: F, tau: f64, nodes: usize) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be positive"));
    }
    if nodes < 4 || nodes % 2 == 1 {
        return Err(invalid("nodes", "must be even and at least 4"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (s, ds) in talbot_nodes(nodes, tau) {
        acc += (s * tau).exp() * fhat(s) * ds;
    }
    let v = (acc / Complex64::new(0.0, nodes as f64)).re;
    if !v.is_finite() {
        return Err(Error::Inversion(format!("non-finite Talbot sum at tau={tau}")));
    }
    Ok(v)
}

/// Precomputed contour data for one maturity and one time order.
#[derive(Clone, Debug)]
pub struct TalbotKernel {
    alpha: f64,
    maturity: f64,
    classical: bool,
    nodes: Vec<Complex64>,
    s_alpha: Vec<Complex64>,
    /// `e^{sT} s' / (iN)`.
    plain: Vec<Complex64>,
    /// `plain · s^{α−1}`.
    weighted: Vec<Complex64>,
}

impl TalbotKernel {
    pub fn new(alpha: f64, maturity: f64, n: usize, classical: bool) -> Self {
        let mut k = Self {
            alpha,
            maturity,
            classical,
            nodes: Vec::new(),
            s_alpha: Vec::new(),
            plain: Vec::new(),
            weighted: Vec::new(),
        };
        if classical {
            return k;
        }
        let denom = Complex64::new(0.0, n as f64);
        for (s, ds) in talbot_nodes(n, maturity) {
            let c = (s * maturity).exp() * ds / denom;
            k.nodes.push(s);
            k.s_alpha.push(s.powf(alpha));
            k.plain.push(c);
            k.weighted.push(c * s.powf(alpha - 1.0));
        }
        k
    }

    /// Mode amplitude `m(T) = E_α(w T^α)`, computed as the inverse transform
    /// of `s^{α−1}/(s^α − w)`. A pole on the principal sheet is removed from
    /// the contour sum and added back through its residue.
    pub fn mode<T: Real>(&self, w: Complex<T>) -> Complex<T> {
        let t = T::cst(self.maturity);
        if self.classical {
            return (w * t).exp();
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for (sa, c) in self.s_alpha.iter().zip(&self.weighted) {
            acc = acc + lift::<T>(*c) / (lift::<T>(*sa) - w);
        }
        if val(w).arg().abs() < self.alpha * PI && val(w).norm() > 0.0 {
            let inv_a = T::cst(1.0 / self.alpha);
            let p = w.powf(inv_a);
            for (s, c) in self.nodes.iter().zip(&self.plain) {
                acc = acc - lift::<T>(*c) * inv_a / (lift::<T>(*s) - p);
            }
            acc = acc + (p * t).exp() * inv_a;
        }
        acc
    }
}

/// Quadrature nodes on `u ∈ [0, U]` for the line `z = c + iu`.
#[derive(Clone, Debug)]
pub struct MellinGrid {
    pub line: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub cutoff: f64,
    pub capped: bool,
}

impl MellinGrid {
    /// Build panels of length up to `π/(k_max + phase)` and extend them until
    /// `u·|m/(z(1−z))|` stays below `tol` over two consecutive panels.
    fn build(params: &ModelParams, kernel: &TalbotKernel, kmax: f64, maturity: f64, cfg: &TransformConfig) -> Self {
        let rule: Rule = gauss_legendre(cfg.mellin_nodes);
        let phase = maturity
            * ((params.rate - params.lambda * params.kappa()).abs()
                + params.lambda * (params.mu_y.abs() + params.sigma_y * params.sigma_y));
        let h = PI / (kmax + phase + 0.1);
        let c = cfg.mellin_line;
        let mut grid = Self {
            line: c,
            nodes: Vec::new(),
            weights: Vec::new(),
            cutoff: 0.0,
            capped: false,
        };
        let limit = cfg.mellin_truncation.unwrap_or(MELLIN_CAP);
        let fixed = cfg.mellin_truncation.is_some();
        let mut a = 0.0;
        let mut quiet = 0;
        // the payoff factor has poles at distance min(c, 1 − c) from the axis,
        // so panels start short and double up to `h`
        let mut len = 0.5 * c.min(1.0 - c);
        while a < limit {
            let b = (a + len.min(h)).min(limit);
            len = (2.0 * len).max(b);
            let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
            let mut env: f64 = 0.0;
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let u = mid + half * x;
                grid.nodes.push(u);
                grid.weights.push(w * half);
                if !fixed {
                    let z = Complex64::new(c, u);
                    let m = kernel.mode(mode_exponent(z, params));
                    env = env.max(m.norm() / (z * (1.0 - z)).norm() * u.max(1.0));
                }
            }
            a = b;
            if !fixed {
                quiet = if env < cfg.tolerance { quiet + 1 } else { 0 };
                if quiet >= 2 {
                    break;
                }
            }
        }
        grid.cutoff = a;
        grid.capped = !fixed && a >= limit;
        grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Mode values `g_j = ω_j m_j/(z_j(1−z_j))` for one parameter vector, shared
/// by every strike at the maturity.
#[derive(Clone, Debug)]
pub struct Modes<T> {
    g: Vec<Complex<T>>,
    pub discount: T,
    pub max_mode: f64,
}

/// Transform pricer for one maturity. The node set depends only on the
/// parameters it was built with, so it can be held fixed while the
/// parameters are perturbed or differentiated.
#[derive(Clone, Debug)]
pub struct TransformPricer {
    kernel: TalbotKernel,
    grid: MellinGrid,
    maturity: f64,
    cfg: TransformConfig,
}

impl TransformPricer {
    /// `kmax` bounds `|ln(S/K)|` over the strikes to be priced.
    pub fn new(params: &ModelParams, maturity: f64, kmax: f64, cfg: &TransformConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(invalid("maturity", "must be positive"));
        }
        let kernel = TalbotKernel::new(params.time_order(), maturity, cfg.talbot_nodes, params.is_classical());
        let grid = MellinGrid::build(params, &kernel, kmax.abs(), maturity, cfg);
        if grid.capped {
            log::warn!("Mellin cutoff reached the cap {MELLIN_CAP:e}; the integrand decays slowly");
        }
        Ok(Self {
            kernel,
            grid,
            maturity,
            cfg: *cfg,
        })
    }

    pub fn grid(&self) -> &MellinGrid {
        &self.grid
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn modes<T: Real>(&self, params: &ModelParams<T>) -> Result<Modes<T>> {
        let c = self.grid.line;
        let mut g = Vec::with_capacity(self.grid.len());
        let mut max_mode: f64 = 0.0;
        for (&u, &w) in self.grid.nodes.iter().zip(&self.grid.weights) {
            let z = Complex64::new(c, u);
            let m = self.kernel.mode(mode_exponent(lift::<T>(z), params));
            max_mode = max_mode.max(val(m).norm());
            g.push(m * lift::<T>(w / (z * (1.0 - z))));
        }
        let zero = Complex::new(T::zero(), T::zero());
        let discount = self.kernel.mode(mode_exponent(zero, params)).re;
        if !(max_mode <= MODE_LIMIT) {
            return Err(Error::Inversion(format!(
                "mode amplitude {max_mode:.3e} exceeds {MODE_LIMIT:e}; problem is ill-posed for these parameters"
            )));
        }
        Ok(Modes { g, discount, max_mode })
    }

    /// Price from precomputed modes.
    pub fn price_with<T: Real>(&self, modes: &Modes<T>, kind: OptionKind, spot: T, strike: T) -> Result<T> {
        let k = (spot / strike).ln();
        let c = T::cst(self.grid.line);
        let damp = (c * k).exp();
        let mut acc = T::zero();
        for (&u, g) in self.grid.nodes.iter().zip(&modes.g) {
            let (sin, cos) = (T::cst(u) * k).sin_cos();
            acc += cos * g.re - sin * g.im;
        }
        let v_min = strike * damp * acc / T::cst(PI);
        match kind {
            OptionKind::Call => Ok(spot - v_min),
            OptionKind::Put => Ok(strike * modes.discount - v_min),
            OptionKind::DownAndOutCall => Err(invalid("kind", "the transform route prices European payoffs only")),
        }
    }

    pub fn price<T: Real>(&self, kind: OptionKind, spot: T, strike: T, params: &ModelParams<T>) -> Result<T> {
        let modes = self.modes(params)?;
        self.price_with(&modes, kind, spot, strike)
    }

    fn diagnostics(&self, modes: &Modes<f64>) -> TransformDiagnostics {
        TransformDiagnostics {
            talbot_nodes: self.cfg.talbot_nodes,
            mellin_nodes: self.grid.len(),
            cutoff: self.grid.cutoff,
            capped: self.grid.capped,
            max_mode: modes.max_mode,
            discount: modes.discount,
            doubling_change: None,
        }
    }
}

/// Discount factor implied by the pricing equation, `E_α(−r T^α)`.
pub fn model_discount(params: &ModelParams, maturity: f64, cfg: &TransformConfig) -> Result<f64> {
    let kernel = TalbotKernel::new(params.time_order(), maturity, cfg.talbot_nodes, params.is_classical());
    Ok(kernel.mode(mode_exponent(Complex64::new(0.0, 0.0), params)).re)
}

/// European call or put by double transform inversion.
pub fn price_european_transform(
    contract: &OptionContract,
    params: &ModelParams,
    cfg: &TransformConfig,
) -> Result<PricingResult> {
    contract.validate()?;
    if !contract.is_european() {
        return Err(invalid("kind", "the transform route prices European payoffs only"));
    }
    let kmax = (contract.spot / contract.strike).ln().abs();
    let pricer = TransformPricer::new(params, contract.maturity, kmax, cfg)?;
    let modes = pricer.modes(params)?;
    let raw = pricer.price_with(&modes, contract.kind, contract.spot, contract.strike)?;
    let mut diag = pricer.diagnostics(&modes);
    if cfg.verify {
        let fine = TransformPricer::new(params, contract.maturity, kmax, &cfg.doubled())?;
        let check = fine.price(contract.kind, contract.spot, contract.strike, params)?;
        let change = (check - raw).abs();
        diag.doubling_change = Some(change);
        if change > 1e-6 * contract.spot {
            return Err(Error::Inversion(format!(
                "node doubling moved the price by {change:.3e} ({diag})"
            )));
        }
    }
    Ok(PricingResult {
        price: raw.max(0.0),
        std_err: None,
        method: Method::Transform,
        diagnostics: Diagnostics::Transform(diag),
    })
}

/// Prices for several strikes at one maturity, reusing the modes.
pub fn price_strip(
    params: &ModelParams,
    kind: OptionKind,
    spot: f64,
    strikes: &[f64],
    maturity: f64,
    cfg: &TransformConfig,
) -> Result<Vec<f64>> {
    let kmax = strikes.iter().map(|k| (spot / k).ln().abs()).fold(0.0, f64::max);
    let pricer = TransformPricer::new(params, maturity, kmax, cfg)?;
    let modes = pricer.modes(params)?;
    strikes
        .iter()
        .map(|&k| pricer.price_with(&modes, kind, spot, k).map(|v| v.max(0.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::bs_call;
    use crate::scalar::HyperDual;
    use crate::specialfn::mittag_leffler;

    #[test]
    fn talbot_elementary_inverses() {
        for &t in &[0.1, 0.5, 1.0, 3.0] {
            let one = invert_laplace_talbot(|s| 1.0 / s, t, 16).unwrap();
            assert!((one - 1.0).abs() < 1e-8);
            let e = invert_laplace_talbot(|s| 1.0 / (s + 1.7), t, 16).unwrap();
            assert!((e - (-1.7 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn classical_denominator() {
        let p = ModelParams::black_scholes(0.2, 0.05);
        let (s, z) = (Complex64::new(1.3, 0.4), Complex64::new(0.5, 2.0));
        let expect = s - (0.02 * (z * z - z) + 0.05 * z - 0.05);
        assert!((transform_denominator(s, z, &p) - expect).norm() < 1e-14);
        let mut q = ModelParams::reference(0.0);
        q.lambda = 0.0;
        let d = transform_denominator(s, Complex64::new(0.0, 0.0), &q);
        assert!((d - s.powf(0.35)).norm() < 1e-14);
    }

    #[test]
    fn mode_matches_mittag_leffler() {
        let kernel = TalbotKernel::new(0.35, 0.75, 16, false);
        let ta = 0.75f64.powf(0.35);
        for &(wr, wi) in &[(-0.02, 0.0), (-0.3, 0.1), (-5.0, -2.0), (0.4, 0.05), (-40.0, 3.0), (1.0, 0.3)] {
            let w = Complex64::new(wr, wi);
            let m = kernel.mode(w);
            let e = mittag_leffler(0.35, 1.0, w * ta).unwrap();
            assert!((m - e).norm() < 1e-8, "w={w}: {m} vs {e}");
        }
    }

    #[test]
    fn dual_modes_are_consistent() {
        let kernel = TalbotKernel::new(0.35, 0.5, 16, false);
        let w0 = Complex64::new(-0.7, 0.2);
        let h = 1e-5;
        let wd = Complex::new(HyperDual::seed_e1(w0.re), HyperDual::constant(w0.im));
        let m = kernel.mode(wd);
        let fd = (kernel.mode(w0 + h) - kernel.mode(w0 - h)) / (2.0 * h);
        assert!((m.re.e1 - fd.re).abs() < 1e-7 && (m.im.e1 - fd.im).abs() < 1e-7);
    }

    #[test]
    fn black_scholes_limit() {
        let p = ModelParams::black_scholes(0.2, 0.05);
        let r = price_european_transform(&OptionContract::call(100.0, 100.0, 1.0), &p, &TransformConfig::default()).unwrap();
        assert!((r.price - bs_call(100.0, 100.0, 1.0, 0.05, 0.2)).abs() < 1e-8);
    }

    #[test]
    fn ill_posed_modes_are_flagged() {
        let mut p = ModelParams::reference(0.02);
        p.sigma_h = 14.35;
        let res = price_european_transform(&OptionContract::call(100.0, 100.0, 1.0), &p, &TransformConfig::default());
        assert!(res.is_err());
    }
}
