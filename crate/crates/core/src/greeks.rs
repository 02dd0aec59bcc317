//! Delta, Gamma, Vega₀, Vega_H and Vanna by forward-mode hyper-dual
//! differentiation through the pricers, with bump-and-revalue as the
//! independent check.

use crate::error::{invalid, Result};
use crate::io::{fmt_f64, write_table, Provenance};
use crate::model::{ModelParams, OptionContract, Pricer};
use crate::pide::{default_grid, solve_layers, GridSpec, PideConfig, PideSolution};
use crate::scalar::HyperDual;
use crate::transform::{TransformConfig, TransformPricer};
use rayon::prelude::*;
use std::fmt;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreekMethod {
    Dual,
    Bump,
}

impl std::str::FromStr for GreekMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dual" => Ok(Self::Dual),
            "bump" => Ok(Self::Bump),
            other => Err(format!("unknown greek method `{other}` (expected dual or bump)")),
        }
    }
}

/// Absolute step sizes used by bump-and-revalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BumpSizes {
    pub spot: f64,
    pub sigma0: f64,
    pub sigma_h: f64,
}

impl BumpSizes {
    /// Relative steps; volatilities below 0.1 are bumped as if they were 0.1
    /// so a zero `σ_H` still gets a usable step.
    pub fn relative(rel: f64, spot: f64, params: &ModelParams) -> Self {
        Self {
            spot: rel * spot,
            sigma0: rel * params.sigma0.max(0.1),
            sigma_h: rel * params.sigma_h.max(0.1),
        }
    }
}

/// Sensitivities of one contract. A Greek is `None` when a revaluation it
/// needs failed.
#[derive(Clone, Debug, PartialEq)]
pub struct GreekReport {
    pub price: f64,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub vega0: Option<f64>,
    pub vega_h: Option<f64>,
    pub vanna: Option<f64>,
    pub method: GreekMethod,
    pub bumps: Option<BumpSizes>,
    /// Largest relative change between step `h` and `h/2` estimates.
    pub richardson_change: Option<f64>,
}

impl GreekReport {
    pub fn failures(&self) -> Vec<&'static str> {
        self.entries()
            .into_iter()
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| k)
            .collect()
    }

    pub fn entries(&self) -> [(&'static str, Option<f64>); 5] {
        [
            ("delta", self.delta),
            ("gamma", self.gamma),
            ("vega0", self.vega0),
            ("vega_h", self.vega_h),
            ("vanna", self.vanna),
        ]
    }
}

impl fmt::Display for GreekReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "price = {}", self.price)?;
        for (k, v) in self.entries() {
            match v {
                Some(v) => writeln!(f, "{k} = {v}")?,
                None => writeln!(f, "{k} = failed")?,
            }
        }
        write!(f, "method = {:?}", self.method)
    }
}

/// A priced parameter point that can be revalued at any spot without
/// repeating the expensive work.
enum Surface {
    Transform { pricer: TransformPricer, modes: crate::transform::Modes<f64> },
    Pide(PideSolution<f64>),
}

struct Engine {
    contract: OptionContract,
    route: Route,
}

enum Route {
    Transform(TransformPricer),
    Pide(GridSpec),
}

impl Engine {
    /// Node sets and grids are fixed from the base point.
    fn new(contract: &OptionContract, params: &ModelParams, pricer: &Pricer) -> Result<Self> {
        contract.validate()?;
        params.validate()?;
        let route = match pricer {
            Pricer::Transform(cfg) => {
                if !contract.is_european() {
                    return Err(invalid("kind", "transform Greeks need a European contract"));
                }
                // room for spot bumps
                let kmax = (contract.spot / contract.strike).ln().abs() + 0.05;
                Route::Transform(TransformPricer::new(params, contract.maturity, kmax, cfg)?)
            }
            Pricer::Pide { n_space, n_time } => Route::Pide(default_grid(contract, params, *n_space, *n_time)?),
        };
        Ok(Self {
            contract: *contract,
            route,
        })
    }

    fn surface(&self, params: &ModelParams) -> Result<Surface> {
        match &self.route {
            Route::Transform(pr) => Ok(Surface::Transform {
                pricer: pr.clone(),
                modes: pr.modes(params)?,
            }),
            Route::Pide(g) => Ok(Surface::Pide(solve_layers(&self.contract, params, g, &PideConfig::default())?)),
        }
    }

    fn value(&self, s: &Surface, spot: f64) -> Result<f64> {
        match s {
            Surface::Transform { pricer, modes } => {
                pricer.price_with(modes, self.contract.kind, spot, self.contract.strike)
            }
            Surface::Pide(sol) => Ok(sol.value_at(spot)),
        }
    }

    /// Price with spot seeded as `spot_seed` and parameters as given.
    fn dual(&self, params: &ModelParams<HyperDual>, spot_seed: HyperDual) -> Result<HyperDual> {
        match &self.route {
            Route::Transform(pr) => pr.price(
                self.contract.kind,
                spot_seed,
                HyperDual::constant(self.contract.strike),
                params,
            ),
            Route::Pide(g) => {
                let sol = solve_layers(&self.contract, params, g, &PideConfig::default())?;
                Ok(sol.value_at(spot_seed))
            }
        }
    }
}

/// Greeks of `contract` by the chosen method. Bump mode uses relative steps
/// of `1e−4`.
pub fn greeks(contract: &OptionContract, params: &ModelParams, pricer: &Pricer, method: GreekMethod) -> Result<GreekReport> {
    let engine = Engine::new(contract, params, pricer)?;
    match method {
        GreekMethod::Dual => dual_greeks(&engine, params),
        GreekMethod::Bump => bump_greeks(&engine, params, BumpSizes::relative(1e-4, contract.spot, params)),
    }
}

fn dual_greeks(engine: &Engine, params: &ModelParams) -> Result<GreekReport> {
    let s = engine.contract.spot;
    let base: ModelParams<HyperDual> = params.lift();
    // spot in e1, σ₀ in e2: Delta, Vega₀ and Vanna from one pass
    let mut p = base;
    p.sigma0 = HyperDual::seed_e2(params.sigma0);
    let a = engine.dual(&p, HyperDual::seed_e1(s))?;
    let gamma = match &engine.route {
        Route::Transform(_) => engine.dual(&base, HyperDual::variable(s)).map(|v| v.e12),
        Route::Pide(_) => {
            // second derivative of the interpolant through the same solution
            let sol = solve_layers(&engine.contract, &base, route_grid(engine), &PideConfig::default())?;
            Ok(sol.value_at(HyperDual::variable(s)).e12)
        }
    };
    let mut q = base;
    q.sigma_h = HyperDual::seed_e1(params.sigma_h);
    let vh = engine.dual(&q, HyperDual::constant(s)).map(|v| v.e1);
    Ok(GreekReport {
        price: a.re,
        delta: Some(a.e1),
        gamma: gamma.ok(),
        vega0: Some(a.e2),
        vega_h: vh.ok(),
        vanna: Some(a.e12),
        method: GreekMethod::Dual,
        bumps: None,
        richardson_change: None,
    })
}

fn route_grid(engine: &Engine) -> &GridSpec {
    match &engine.route {
        Route::Pide(g) => g,
        Route::Transform(_) => unreachable!("transform route has no grid"),
    }
}

fn richardson(coarse: f64, fine: f64) -> (f64, f64) {
    let change = (coarse - fine).abs() / fine.abs().max(1e-12);
    ((4.0 * fine - coarse) / 3.0, change)
}

fn bump_greeks(engine: &Engine, params: &ModelParams, bumps: BumpSizes) -> Result<GreekReport> {
    let s = engine.contract.spot;
    let (h, k0, kh) = (bumps.spot, bumps.sigma0, bumps.sigma_h);
    // 0: base; 1..=4: σ₀ ± k, ± k/2; 5..=8: σ_H ± k, ± k/2
    let mut points = vec![*params];
    for (f, k) in [(0usize, k0), (1, kh)] {
        for m in [1.0, -1.0, 0.5, -0.5] {
            let mut p = *params;
            if f == 0 {
                p.sigma0 += m * k;
            } else {
                p.sigma_h = (p.sigma_h + m * k).max(0.0);
            }
            points.push(p);
        }
    }
    let surfaces: Vec<Result<Surface>> = points.par_iter().map(|p| engine.surface(p)).collect();
    let base = surfaces[0].as_ref().map_err(|e| invalid("params", format!("base point failed: {e}")))?;
    let v = |i: usize, spot: f64| -> Option<f64> { surfaces[i].as_ref().ok().and_then(|sf| engine.value(sf, spot).ok()) };
    let price = engine.value(base, s)?;
    let mut change: f64 = 0.0;
    let mut extrapolate = |c: Option<f64>, f: Option<f64>| -> Option<f64> {
        let (r, ch) = richardson(c?, f?);
        change = change.max(ch);
        Some(r)
    };

    let d = |step: f64| Some((v(0, s + step)? - v(0, s - step)?) / (2.0 * step));
    let g = |step: f64| Some((v(0, s + step)? - 2.0 * price + v(0, s - step)?) / (step * step));
    let delta = extrapolate(d(h), d(h / 2.0));
    let gamma = extrapolate(g(h), g(h / 2.0));

    let vega = |up: usize, dn: usize, step: f64| Some((v(up, s)? - v(dn, s)?) / (2.0 * step));
    let vega0 = extrapolate(vega(1, 2, k0), vega(3, 4, k0 / 2.0));
    // σ_H is floored at zero, so use the actual one-sided spacing there
    let span = |up: usize, dn: usize| points[up].sigma_h - points[dn].sigma_h;
    let vh = |up: usize, dn: usize| Some((v(up, s)? - v(dn, s)?) / span(up, dn));
    let vega_h = extrapolate(vh(5, 6), vh(7, 8));

    let vanna = |up: usize, dn: usize, hs: f64, ks: f64| {
        Some((v(up, s + hs)? - v(up, s - hs)? - v(dn, s + hs)? + v(dn, s - hs)?) / (4.0 * hs * ks))
    };
    let vanna = extrapolate(vanna(1, 2, h, k0), vanna(3, 4, h / 2.0, k0 / 2.0));

    Ok(GreekReport {
        price,
        delta,
        gamma,
        vega0,
        vega_h,
        vanna,
        method: GreekMethod::Bump,
        bumps: Some(bumps),
        richardson_change: Some(change),
    })
}

/// `S·∂V/∂S + K·∂V/∂K − V`, relative to `V`, from one dual pass through the
/// transform. Vanishes for any price homogeneous of degree one.
pub fn homogeneity_residual(contract: &OptionContract, params: &ModelParams, cfg: &TransformConfig) -> Result<f64> {
    if !contract.is_european() {
        return Err(invalid("kind", "homogeneity holds for European payoffs"));
    }
    let kmax = (contract.spot / contract.strike).ln().abs();
    let pr = TransformPricer::new(params, contract.maturity, kmax, cfg)?;
    let v = pr.price(
        contract.kind,
        HyperDual::seed_e1(contract.spot),
        HyperDual::seed_e2(contract.strike),
        &params.lift(),
    )?;
    Ok((contract.spot * v.e1 + contract.strike * v.e2 - v.re) / v.re)
}

/// Model variants compared in the Greek table.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    /// Black-Scholes with the same `σ₀`.
    Baseline,
    /// Fractional component kept, jumps removed.
    MemoryOnly,
    Full,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Baseline, Scenario::MemoryOnly, Scenario::Full];

    pub fn params(self, full: &ModelParams) -> ModelParams {
        match self {
            Self::Baseline => ModelParams::black_scholes(full.sigma0, full.rate),
            Self::MemoryOnly => ModelParams {
                lambda: 0.0,
                ..*full
            },
            Self::Full => *full,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::MemoryOnly => "memory_only",
            Self::Full => "full",
        }
    }
}

/// Greeks of one contract under each scenario.
pub fn scenario_table(
    contract: &OptionContract,
    full: &ModelParams,
    pricer: &Pricer,
    method: GreekMethod,
) -> Result<Vec<(Scenario, GreekReport)>> {
    Scenario::ALL
        .iter()
        .map(|&sc| Ok((sc, greeks(contract, &sc.params(full), pricer, method)?)))
        .collect()
}

pub fn write_scenarios<W: Write>(out: W, prov: Option<&Provenance>, table: &[(Scenario, GreekReport)]) -> Result<()> {
    let cell = |v: Option<f64>| v.map_or_else(|| "failed".to_string(), fmt_f64);
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(sc, r)| {
            let mut row = vec![sc.name().to_string(), fmt_f64(r.price)];
            row.extend(r.entries().iter().map(|(_, v)| cell(*v)));
            row
        })
        .collect();
    write_table(
        out,
        prov,
        &["scenario", "price", "delta", "gamma", "vega0", "vega_h", "vanna"],
        &rows,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VannaPoint {
    pub moneyness: f64,
    pub vanna_memory_only: f64,
    pub vanna_full: f64,
}

/// Call Vanna across moneyness `S/K`, with and without jumps, by dual
/// differentiation through the transform.
pub fn vanna_smile(
    spot: f64,
    maturity: f64,
    full: &ModelParams,
    moneyness: &[f64],
    cfg: &TransformConfig,
) -> Result<Vec<VannaPoint>> {
    if moneyness.len() < 9 {
        return Err(invalid("moneyness", "at least 9 points are needed"));
    }
    let pricer = Pricer::Transform(*cfg);
    let memory = Scenario::MemoryOnly.params(full);
    moneyness
        .par_iter()
        .map(|&m| {
            let c = OptionContract::call(spot, spot / m, maturity);
            let vanna = |p: &ModelParams| -> Result<f64> {
                greeks(&c, p, &pricer, GreekMethod::Dual)?
                    .vanna
                    .ok_or_else(|| invalid("vanna", "dual pass failed"))
            };
            Ok(VannaPoint {
                moneyness: m,
                vanna_memory_only: vanna(&memory)?,
                vanna_full: vanna(full)?,
            })
        })
        .collect()
}

pub fn write_vanna_smile<W: Write>(out: W, prov: Option<&Provenance>, points: &[VannaPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![fmt_f64(p.moneyness), fmt_f64(p.vanna_memory_only), fmt_f64(p.vanna_full)])
        .collect();
    write_table(out, prov, &["moneyness", "vanna_memory_only", "vanna_full"], &rows)
}

/// Write a report as `key,value` rows.
pub fn write_report<W: Write>(out: W, prov: Option<&Provenance>, r: &GreekReport) -> Result<()> {
    let mut rows = vec![vec!["price".to_string(), fmt_f64(r.price)]];
    for (k, v) in r.entries() {
        rows.push(vec![k.to_string(), v.map_or_else(|| "failed".into(), fmt_f64)]);
    }
    rows.push(vec!["method".into(), format!("{:?}", r.method).to_lowercase()]);
    if let Some(b) = r.bumps {
        rows.push(vec!["bump_spot".into(), fmt_f64(b.spot)]);
        rows.push(vec!["bump_sigma0".into(), fmt_f64(b.sigma0)]);
        rows.push(vec!["bump_sigma_h".into(), fmt_f64(b.sigma_h)]);
    }
    write_table(out, prov, &["key", "value"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::bs_call_greeks;

    #[test]
    fn black_scholes_dual_greeks() {
        let p = ModelParams::black_scholes(0.2, 0.05);
        let c = OptionContract::call(100.0, 100.0, 1.0);
        let r = greeks(&c, &p, &Pricer::Transform(TransformConfig::default()), GreekMethod::Dual).unwrap();
        let e = bs_call_greeks(100.0, 100.0, 1.0, 0.05, 0.2);
        assert!((r.delta.unwrap() - 0.6368).abs() < 1e-4);
        assert!((r.delta.unwrap() - e.delta).abs() < 1e-8);
        assert!((r.gamma.unwrap() - e.gamma).abs() < 1e-8);
        assert!((r.vega0.unwrap() - e.vega).abs() < 1e-6);
        assert!((r.vanna.unwrap() - e.vanna).abs() < 1e-6);
    }

    #[test]
    fn richardson_removes_quadratic_error() {
        let f = |h: f64| 2.0 + 3.0 * h * h;
        let (r, _) = richardson(f(0.1), f(0.05));
        assert!((r - 2.0).abs() < 1e-12);
    }
}
