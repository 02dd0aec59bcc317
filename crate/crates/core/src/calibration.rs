//! Least-squares calibration of `(σ₀, σ_H, H, λ, μ_Y, σ_Y)` to European call
//! quotes by differential evolution, optionally polished by Nelder-Mead.

use crate::closed_form::{bs_call, bs_call_greeks};
use crate::error::{invalid, Error, Result};
use crate::io::{fmt_f64, write_table, Provenance};
use crate::model::{ModelParams, OptionContract, OptionKind, Pricer};
use crate::pide::{default_grid, solve_pide};
use crate::rng::aux_stream;
use crate::transform::{price_strip, TransformConfig};
use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::Rng;
use rayon::prelude::*;
use std::io::{Read, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::path::Path;

/// Number of calibrated parameters.
pub const DIM: usize = 6;

/// Parameter names in vector order.
pub const PARAM_NAMES: [&str; DIM] = ["sigma0", "sigma_h", "hurst", "lambda", "mu_y", "sigma_y"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quote {
    pub strike: f64,
    pub maturity: f64,
    pub price: f64,
    pub spot: f64,
    pub rate: f64,
}

/// A set of call quotes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuoteSet {
    quotes: Vec<Quote>,
}

const HEADER: [&str; 5] = ["strike", "maturity", "price", "spot", "rate"];

impl QuoteSet {
    pub fn new(quotes: Vec<Quote>) -> Result<Self> {
        for q in &quotes {
            let ok = [q.strike, q.maturity, q.price, q.spot].iter().all(|v| v.is_finite() && *v > 0.0)
                && q.rate.is_finite();
            if !ok {
                return Err(invalid("quotes", format!("malformed quote {q:?}")));
            }
        }
        Ok(Self { quotes })
    }

    /// Parse CSV with header `strike,maturity,price,spot,rate`. Lines starting
    /// with `#` are skipped.
    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers()?.clone();
        let idx: Vec<usize> = HEADER
            .iter()
            .map(|h| {
                header
                    .iter()
                    .position(|c| c == *h)
                    .ok_or_else(|| invalid("quotes", format!("missing column `{h}`")))
            })
            .collect::<Result<_>>()?;
        let mut quotes = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(idx[i])
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| invalid("quotes", format!("row {}: bad `{}`", line + 1, HEADER[i])))
            };
            quotes.push(Quote {
                strike: f(0)?,
                maturity: f(1)?,
                price: f(2)?,
                spot: f(3)?,
                rate: f(4)?,
            });
        }
        Self::new(quotes)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, out: W, prov: Option<&Provenance>) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .quotes
            .iter()
            .map(|q| [q.strike, q.maturity, q.price, q.spot, q.rate].iter().map(|v| fmt_f64(*v)).collect())
            .collect();
        write_table(out, prov, &HEADER, &rows)
    }

    /// Keep quotes with `lo < S/K < hi` and `T < max_maturity`.
    pub fn filtered(&self, lo: f64, hi: f64, max_maturity: f64) -> Self {
        Self {
            quotes: self
                .quotes
                .iter()
                .filter(|q| {
                    let m = q.spot / q.strike;
                    m > lo && m < hi && q.maturity < max_maturity
                })
                .copied()
                .collect(),
        }
    }

    /// The standard filter: moneyness in (0.8, 1.2) and maturity below one year.
    pub fn standard_filter(&self) -> Self {
        self.filtered(0.8, 1.2, 1.0)
    }

    /// Noiseless call quotes generated by the transform pricer.
    pub fn synthetic(params: &ModelParams, spot: f64, strikes: &[f64], maturities: &[f64]) -> Result<Self> {
        let mut quotes = Vec::new();
        for &t in maturities {
            let prices = price_strip(params, OptionKind::Call, spot, strikes, t, &TransformConfig::default())?;
            for (&k, &p) in strikes.iter().zip(&prices) {
                quotes.push(Quote {
                    strike: k,
                    maturity: t,
                    price: p,
                    spot,
                    rate: params.rate,
                });
            }
        }
        Self::new(quotes)
    }

    /// Multiply every price by `1 + level·ε` with `ε ~ N(0,1)` from the
    /// auxiliary stream of `seed`.
    pub fn with_noise(&self, level: f64, seed: u64) -> Self {
        let mut rng = aux_stream(seed, u64::MAX);
        let quotes = self
            .quotes
            .iter()
            .map(|q| {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                Quote {
                    price: q.price * (1.0 + level * e),
                    ..*q
                }
            })
            .collect();
        Self { quotes }
    }

    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn quotes(&self) -> &[Quote] {
        &self.quotes
    }

    /// Quotes grouped by `(maturity, spot, rate)`, each group priced with one
    /// set of transform modes. Keys are compared bitwise.
    fn groups(&self) -> Vec<(Quote, Vec<usize>)> {
        let mut out: Vec<(Quote, Vec<usize>)> = Vec::new();
        for (i, q) in self.quotes.iter().enumerate() {
            let key = (q.maturity.to_bits(), q.spot.to_bits(), q.rate.to_bits());
            match out
                .iter_mut()
                .find(|(r, _)| (r.maturity.to_bits(), r.spot.to_bits(), r.rate.to_bits()) == key)
            {
                Some((_, idx)) => idx.push(i),
                None => out.push((*q, vec![i])),
            }
        }
        out
    }
}

/// Residual weighting in the least-squares sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Weighting {
    #[default]
    Price,
    /// Divide each residual by the Black-Scholes vega at the quote's implied
    /// volatility, which approximates a fit in volatility units.
    Vega,
}

/// Model prices for every quote; the quote's own spot and rate override the
/// corresponding fields of `params`.
pub fn model_prices(params: &ModelParams, quotes: &QuoteSet, pricer: &Pricer) -> Result<Vec<f64>> {
    let mut out = vec![0.0; quotes.len()];
    match pricer {
        Pricer::Transform(cfg) => {
            for (head, idx) in quotes.groups() {
                let p = ModelParams { rate: head.rate, ..*params };
                let strikes: Vec<f64> = idx.iter().map(|&i| quotes.quotes[i].strike).collect();
                let prices = price_strip(&p, OptionKind::Call, head.spot, &strikes, head.maturity, cfg)?;
                for (&i, v) in idx.iter().zip(prices) {
                    out[i] = v;
                }
            }
        }
        Pricer::Pide { n_space, n_time } => {
            for (q, o) in quotes.quotes.iter().zip(out.iter_mut()) {
                let p = ModelParams { rate: q.rate, ..*params };
                let c = OptionContract::call(q.spot, q.strike, q.maturity);
                *o = solve_pide(&c, &p, &default_grid(&c, &p, *n_space, *n_time)?)?.price;
            }
        }
    }
    Ok(out)
}

/// Black-Scholes implied volatility by bisection on `[1e−4, 5]`.
pub fn implied_vol(price: f64, spot: f64, strike: f64, maturity: f64, rate: f64) -> Option<f64> {
    let (mut lo, mut hi) = (1e-4, 5.0);
    let f = |s: f64| bs_call(spot, strike, maturity, rate, s) - price;
    if f(lo) > 0.0 || f(hi) < 0.0 {
        return None;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn weights(quotes: &QuoteSet, weighting: Weighting) -> Vec<f64> {
    match weighting {
        Weighting::Price => vec![1.0; quotes.len()],
        Weighting::Vega => quotes
            .quotes
            .iter()
            .map(|q| {
                let iv = implied_vol(q.price, q.spot, q.strike, q.maturity, q.rate).unwrap_or(0.2);
                let v = bs_call_greeks(q.spot, q.strike, q.maturity, q.rate, iv).vega;
                1.0 / v.max(1e-3 * q.spot * q.maturity.sqrt()).powi(2)
            })
            .collect(),
    }
}

/// Sum of squared price residuals. Any pricing failure gives `+∞`.
pub fn objective(params: &ModelParams, quotes: &QuoteSet, pricer: &Pricer) -> f64 {
    weighted_objective(params, quotes, pricer, &vec![1.0; quotes.len()])
}

fn weighted_objective(params: &ModelParams, quotes: &QuoteSet, pricer: &Pricer, w: &[f64]) -> f64 {
    match model_prices(params, quotes, pricer) {
        Ok(m) => {
            let s: f64 = quotes
                .quotes
                .iter()
                .zip(&m)
                .zip(w)
                .map(|((q, v), w)| w * (v - q.price).powi(2))
                .sum();
            if s.is_finite() {
                s
            } else {
                f64::INFINITY
            }
        }
        Err(e) => {
            log::debug!("objective: pricing failed at {params:?}: {e}");
            f64::INFINITY
        }
    }
}

/// Root-mean-square percentage error of the model prices.
pub fn rmse_pct(params: &ModelParams, quotes: &QuoteSet, pricer: &Pricer) -> Result<f64> {
    if quotes.is_empty() {
        return Err(invalid("quotes", "empty quote set"));
    }
    let m = model_prices(params, quotes, pricer)?;
    let ms: f64 = quotes
        .quotes
        .iter()
        .zip(&m)
        .map(|(q, v)| ((v - q.price) / q.price).powi(2))
        .sum::<f64>()
        / quotes.len() as f64;
    Ok(100.0 * ms.sqrt())
}

/// Box constraints in the order of [`PARAM_NAMES`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lo: [f64; DIM],
    pub hi: [f64; DIM],
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lo: [0.01, 0.0, 0.05, 0.0, -0.5, 0.01],
            hi: [1.0, 1.0, 0.95, 5.0, 0.5, 1.0],
        }
    }
}

impl Bounds {
    pub fn point(theta: [f64; DIM]) -> Self {
        Self { lo: theta, hi: theta }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..DIM {
            if !(self.lo[i].is_finite() && self.hi[i].is_finite() && self.lo[i] <= self.hi[i]) {
                return Err(invalid("bounds", format!("empty interval for {}", PARAM_NAMES[i])));
            }
        }
        if self.lo[2] <= 0.0 || self.hi[2] >= 1.0 {
            return Err(invalid("bounds", "hurst must stay inside (0, 1)"));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &[f64; DIM]) -> bool {
        (0..DIM).all(|i| theta[i] >= self.lo[i] && theta[i] <= self.hi[i])
    }
}

/// Parameter vector in [`PARAM_NAMES`] order.
pub fn to_vector(p: &ModelParams) -> [f64; DIM] {
    [p.sigma0, p.sigma_h, p.hurst, p.lambda, p.mu_y, p.sigma_y]
}

pub fn from_vector(theta: &[f64; DIM], rate: f64) -> ModelParams {
    ModelParams {
        sigma0: theta[0],
        sigma_h: theta[1],
        hurst: theta[2],
        lambda: theta[3],
        mu_y: theta[4],
        sigma_y: theta[5],
        rate,
        mu: rate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeConfig {
    /// Population size; `None` means `15·DIM`.
    pub population: Option<usize>,
    pub mutation: f64,
    pub crossover: f64,
    pub generations: usize,
    pub seed: u64,
    /// Stop when the best objective has not improved for this many
    /// generations.
    pub patience: usize,
    /// Stop as soon as the best objective falls to this level.
    pub target: f64,
    pub weighting: Weighting,
    /// Nelder-Mead iterations started from the best member once DE stops;
    /// 0 skips the polish.
    pub polish: usize,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            population: None,
            mutation: 0.7,
            crossover: 0.9,
            generations: 200,
            seed: 42,
            patience: 200,
            target: 0.0,
            weighting: Weighting::Price,
            polish: 3000,
        }
    }
}

impl DeConfig {
    pub fn population_size(&self) -> usize {
        self.population.unwrap_or(15 * DIM)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size() < 4 {
            return Err(invalid("population", "rand/1 needs at least 4 members"));
        }
        if !(self.mutation > 0.0 && self.mutation <= 2.0) {
            return Err(invalid("mutation", "must lie in (0, 2]"));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(invalid("crossover", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibResult {
    pub theta_hat: ModelParams,
    pub objective: f64,
    pub rmse_pct: f64,
    /// Best objective after initialisation and after each generation. The
    /// polish is not a generation and does not appear here.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub generations: usize,
}

/// Differential evolution, rand/1/bin. Member `i` of generation `g` draws from
/// its own auxiliary stream, so trajectories do not depend on scheduling.
pub fn calibrate_de(quotes: &QuoteSet, bounds: &Bounds, cfg: &DeConfig, pricer: &Pricer) -> Result<CalibResult> {
    bounds.validate()?;
    cfg.validate()?;
    if quotes.is_empty() {
        return Err(invalid("quotes", "empty quote set"));
    }
    let rate = quotes.quotes[0].rate;
    let np = cfg.population_size();
    let w = weights(quotes, cfg.weighting);
    let eval = |theta: &[f64; DIM]| weighted_objective(&from_vector(theta, rate), quotes, pricer, &w);

    let mut init = aux_stream(cfg.seed, 0);
    let mut pop: Vec<[f64; DIM]> = (0..np)
        .map(|_| std::array::from_fn(|d| bounds.lo[d] + (bounds.hi[d] - bounds.lo[d]) * init.random::<f64>()))
        .collect();
    let mut fit: Vec<f64> = pop.par_iter().map(eval).collect();
    let mut evaluations = np;
    if fit.iter().all(|f| !f.is_finite()) {
        return Err(Error::Calibration("every initial member failed to price".into()));
    }
    let best_of = |fit: &[f64]| {
        fit.iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bf), (i, &f)| if f < bf { (i, f) } else { (bi, bf) })
    };
    let mut history = vec![best_of(&fit).1];
    let mut stall = 0;
    let mut generations = 0;

    for g in 0..cfg.generations {
        if history.last().is_some_and(|&b| b <= cfg.target) || stall >= cfg.patience {
            break;
        }
        let trials: Vec<[f64; DIM]> = (0..np)
            .map(|i| {
                let mut rng = aux_stream(cfg.seed, 1 + (g * np + i) as u64);
                let mut pick = |avoid: &[usize]| loop {
                    let r = rng.random_range(0..np);
                    if !avoid.contains(&r) {
                        break r;
                    }
                };
                let a = pick(&[i]);
                let b = pick(&[i, a]);
                let c = pick(&[i, a, b]);
                let forced = rng.random_range(0..DIM);
                std::array::from_fn(|d| {
                    let cross = rng.random::<f64>() < cfg.crossover || d == forced;
                    if !cross {
                        return pop[i][d];
                    }
                    let v = pop[a][d] + cfg.mutation * (pop[b][d] - pop[c][d]);
                    // bounce back halfway towards the parent
                    if v < bounds.lo[d] {
                        0.5 * (bounds.lo[d] + pop[i][d])
                    } else if v > bounds.hi[d] {
                        0.5 * (bounds.hi[d] + pop[i][d])
                    } else {
                        v
                    }
                })
            })
            .collect();
        let trial_fit: Vec<f64> = trials.par_iter().map(eval).collect();
        evaluations += np;
        for i in 0..np {
            if trial_fit[i] <= fit[i] {
                pop[i] = trials[i];
                fit[i] = trial_fit[i];
            }
        }
        let best = best_of(&fit).1;
        if best < *history.last().unwrap_or(&f64::INFINITY) {
            stall = 0;
        } else {
            stall += 1;
        }
        history.push(best);
        generations = g + 1;
    }

    let (bi, mut bf) = best_of(&fit);
    let mut best = pop[bi];
    if cfg.polish > 0 {
        let (theta, f, n) = polish(&best, bounds, cfg.polish, &eval)?;
        evaluations += n;
        if f < bf {
            best = theta;
            bf = f;
        }
    }
    let theta_hat = from_vector(&best, rate);
    let rmse = rmse_pct(&theta_hat, quotes, pricer)?;
    Ok(CalibResult {
        theta_hat,
        objective: bf,
        rmse_pct: rmse,
        history,
        evaluations,
        generations,
    })
}

struct Boxed<'a, F> {
    eval: &'a F,
    bounds: &'a Bounds,
    calls: AtomicUsize,
}

impl<F: Fn(&[f64; DIM]) -> f64> CostFunction for Boxed<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        let theta: [f64; DIM] = std::array::from_fn(|d| x[d]);
        if (0..DIM).any(|d| !(self.bounds.lo[d]..=self.bounds.hi[d]).contains(&theta[d])) {
            return Ok(f64::INFINITY);
        }
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok((self.eval)(&theta))
    }
}

/// Nelder-Mead inside the box from a simplex of 5% steps around `start`.
fn polish<F: Fn(&[f64; DIM]) -> f64>(
    start: &[f64; DIM],
    bounds: &Bounds,
    iters: usize,
    eval: &F,
) -> Result<([f64; DIM], f64, usize)> {
    let mut simplex = vec![start.to_vec()];
    for d in 0..DIM {
        let step = 0.05 * (bounds.hi[d] - bounds.lo[d]);
        let mut v = start.to_vec();
        v[d] = if start[d] + step <= bounds.hi[d] { start[d] + step } else { start[d] - step };
        simplex.push(v);
    }
    let problem = Boxed { eval, bounds, calls: AtomicUsize::new(0) };
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(1e-12)
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.max_iters(iters as u64))
        .run()
        .map_err(|e| Error::Calibration(e.to_string()))?;
    let calls = res.problem.problem.as_ref().map_or(0, |p| p.calls.load(Ordering::Relaxed));
    let state = res.state();
    let theta = state
        .get_best_param()
        .map(|x| std::array::from_fn(|d| x[d]))
        .unwrap_or(*start);
    Ok((theta, state.get_best_cost(), calls))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub hurst: f64,
    pub lambda: f64,
    pub rmse_pct: f64,
}

/// Pricing RMSE over an `(H, λ)` grid with the other parameters fixed.
/// Cells that fail to price report `+∞`.
pub fn rmse_surface(
    quotes: &QuoteSet,
    h_grid: &[f64],
    lambda_grid: &[f64],
    fixed: &ModelParams,
    pricer: &Pricer,
) -> Result<Vec<SurfacePoint>> {
    if h_grid.is_empty() || lambda_grid.is_empty() {
        return Err(invalid("grid", "H and lambda grids must be nonempty"));
    }
    let cells: Vec<(f64, f64)> = h_grid
        .iter()
        .flat_map(|&h| lambda_grid.iter().map(move |&l| (h, l)))
        .collect();
    Ok(cells
        .par_iter()
        .map(|&(h, l)| {
            let p = ModelParams {
                hurst: h,
                lambda: l,
                ..*fixed
            };
            SurfacePoint {
                hurst: h,
                lambda: l,
                rmse_pct: rmse_pct(&p, quotes, pricer).unwrap_or(f64::INFINITY),
            }
        })
        .collect())
}

pub fn write_surface<W: Write>(out: W, prov: Option<&Provenance>, surface: &[SurfacePoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = surface
        .iter()
        .map(|s| vec![fmt_f64(s.hurst), fmt_f64(s.lambda), fmt_f64(s.rmse_pct)])
        .collect();
    write_table(out, prov, &["H", "lambda", "rmse_pct"], &rows)
}
