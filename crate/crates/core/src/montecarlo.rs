//! Monte Carlo prices under the risk-neutral smfBm-J dynamics.

use crate::closed_form::bs_down_and_out_call;
use crate::error::{invalid, Result};
use crate::io::{fmt_f64, write_table, Provenance};
use crate::measure::RiskNeutralMode;
use crate::model::{Diagnostics, Method, ModelParams, OptionContract, OptionKind, PricingResult};
use crate::process::{gaussian_variance, PathBatch, PathSimulator, SimMeasure, BATCH_SIZE};
use rayon::prelude::*;
use std::fmt;
use std::io::Write;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ControlVariate {
    #[default]
    None,
    /// Geometric Brownian motion on the same Brownian draws, whose
    /// continuously monitored down-and-out price is known in closed form.
    BsBarrierAnalytic,
    /// The analytic barrier control plus the discounted terminal price,
    /// whose mean is `S₀`.
    BsBarrierAndForward,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McConfig {
    pub n_paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub control_variate: ControlVariate,
    pub antithetic: bool,
    pub measure: RiskNeutralMode,
    /// Brownian-bridge survival correction between monitoring dates, using
    /// the `σ₀` part only.
    pub bridge_correction: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            steps_per_year: 500,
            seed: 42,
            control_variate: ControlVariate::None,
            antithetic: false,
            measure: RiskNeutralMode::Naive,
            bridge_correction: false,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(invalid("n_paths", "must be at least 100"));
        }
        if self.antithetic && self.n_paths % 2 == 1 {
            return Err(invalid("n_paths", "must be even with antithetic pairs"));
        }
        if self.steps_per_year == 0 {
            return Err(invalid("steps_per_year", "must be positive"));
        }
        Ok(())
    }

    /// Monitoring steps for a contract; Europeans need only the terminal value.
    pub fn steps_for(&self, contract: &OptionContract) -> usize {
        if contract.is_european() {
            1
        } else {
            ((self.steps_per_year as f64 * contract.maturity).ceil() as usize).max(1)
        }
    }
}

/// Running means and co-moments of the target (index 0) and up to two
/// controls.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: f64,
    pub mean: [f64; 3],
    pub m2: [[f64; 3]; 3],
}

impl Moments {
    pub fn push(&mut self, v: [f64; 3]) {
        self.n += 1.0;
        let d: [f64; 3] = std::array::from_fn(|i| v[i] - self.mean[i]);
        for i in 0..3 {
            self.mean[i] += d[i] / self.n;
        }
        for i in 0..3 {
            for j in 0..3 {
                self.m2[i][j] += d[i] * (v[j] - self.mean[j]);
            }
        }
    }

    /// Chan's pairwise combination.
    pub fn merge(&self, o: &Self) -> Self {
        if self.n == 0.0 {
            return *o;
        }
        if o.n == 0.0 {
            return *self;
        }
        let n = self.n + o.n;
        let d: [f64; 3] = std::array::from_fn(|i| o.mean[i] - self.mean[i]);
        let f = self.n * o.n / n;
        Self {
            n,
            mean: std::array::from_fn(|i| self.mean[i] + d[i] * o.n / n),
            m2: std::array::from_fn(|i| std::array::from_fn(|j| self.m2[i][j] + o.m2[i][j] + d[i] * d[j] * f)),
        }
    }

    pub fn mean_y(&self) -> f64 {
        self.mean[0]
    }

    pub fn se_y(&self) -> f64 {
        (self.m2[0][0] / (self.n - 1.0) / self.n).sqrt()
    }

    /// Regression coefficients of the target on the first `k` controls and
    /// the residual co-moment.
    fn regress(&self, k: usize) -> (Vec<f64>, f64) {
        let m = &self.m2;
        let coef = match k {
            1 if m[1][1] > 0.0 => vec![m[0][1] / m[1][1]],
            2 => {
                let det = m[1][1] * m[2][2] - m[1][2] * m[1][2];
                if det > 0.0 {
                    vec![
                        (m[2][2] * m[0][1] - m[1][2] * m[0][2]) / det,
                        (m[1][1] * m[0][2] - m[1][2] * m[0][1]) / det,
                    ]
                } else {
                    vec![0.0; 2]
                }
            }
            _ => vec![0.0; k],
        };
        let explained: f64 = coef.iter().enumerate().map(|(i, b)| b * m[0][i + 1]).sum();
        (coef, (m[0][0] - explained).max(0.0))
    }
}

/// Deterministic pairwise reduction in index order.
pub fn pairwise_merge(parts: &[Moments]) -> Moments {
    match parts.len() {
        0 => Moments::default(),
        1 => parts[0],
        n => pairwise_merge(&parts[..n / 2]).merge(&pairwise_merge(&parts[n / 2..])),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McDiagnostics {
    pub n_paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub measure: RiskNeutralMode,
    /// Estimated control coefficients, empty without controls.
    pub cv_coefficients: Vec<f64>,
    pub control_mean: Option<f64>,
    /// Standard error of the plain estimator on the same paths.
    pub plain_se: f64,
    pub batches: Vec<Moments>,
}

impl fmt::Display for McDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "paths={} steps={} seed={} antithetic={} measure={:?} plain_se={:.6e}",
            self.n_paths, self.steps, self.seed, self.antithetic, self.measure, self.plain_se
        )?;
        for (i, b) in self.cv_coefficients.iter().enumerate() {
            write!(f, " cv_coefficient_{i}={b:.6}")?;
        }
        Ok(())
    }
}

impl McDiagnostics {
    /// Per-batch table `batch,mean,se` of the plain estimator.
    pub fn write_batches<W: Write>(&self, out: W, prov: Option<&Provenance>) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .batches
            .iter()
            .enumerate()
            .map(|(i, m)| vec![i.to_string(), fmt_f64(m.mean_y()), fmt_f64(m.se_y())])
            .collect();
        write_table(out, prov, &["batch", "mean", "se"], &rows)
    }
}

/// Continuously monitored down-and-out call under geometric Brownian motion.
pub fn bs_barrier_analytic(contract: &OptionContract, sigma: f64, rate: f64) -> Result<f64> {
    contract.validate()?;
    match (contract.kind, contract.barrier) {
        (OptionKind::DownAndOutCall, Some(b)) => Ok(bs_down_and_out_call(
            contract.spot,
            contract.strike,
            b,
            contract.maturity,
            rate,
            sigma,
        )),
        _ => Err(invalid("kind", "the analytic control prices down-and-out calls only")),
    }
}

fn bridge_survival(x0: f64, x1: f64, barrier: f64, var: f64) -> f64 {
    if x0 <= barrier || x1 <= barrier {
        return 0.0;
    }
    if var <= 0.0 {
        return 1.0;
    }
    1.0 - (-2.0 * (x0 - barrier) * (x1 - barrier) / var).exp()
}

struct Evaluator<'a> {
    contract: &'a OptionContract,
    discount: f64,
    ln_b: f64,
    steps: usize,
    dt: f64,
    sigma0: f64,
    bridge: bool,
    control: Option<ControlSpec>,
}

#[derive(Clone, Copy)]
struct ControlSpec {
    sigma: f64,
    drift: f64,
    ln_s0: f64,
}

impl Evaluator<'_> {
    fn target(&self, b: &PathBatch, p: usize) -> f64 {
        let lp = b.column(&b.log_prices, p);
        let terminal = lp[self.steps].exp();
        match self.contract.kind {
            OptionKind::Call | OptionKind::Put => self.discount * self.contract.payoff(terminal),
            OptionKind::DownAndOutCall => {
                let mut survive = 1.0;
                for j in 1..=self.steps {
                    if lp[j] <= self.ln_b {
                        return 0.0;
                    }
                    if self.bridge {
                        let v = self.sigma0 * self.sigma0 * self.dt;
                        survive *= bridge_survival(lp[j - 1], lp[j], self.ln_b, v);
                    }
                }
                self.discount * survive * self.contract.payoff(terminal)
            }
        }
    }

    fn forward(&self, b: &PathBatch, p: usize) -> f64 {
        self.discount * b.column(&b.log_prices, p)[self.steps].exp()
    }

    fn control(&self, b: &PathBatch, p: usize) -> f64 {
        let Some(c) = self.control else { return 0.0 };
        let w = b.column(&b.brownian, p);
        let v = c.sigma * c.sigma * self.dt;
        let mut prev = c.ln_s0;
        let mut survive = 1.0;
        for (j, wj) in w.iter().enumerate().skip(1) {
            let x = c.ln_s0 + c.drift * j as f64 * self.dt + c.sigma * wj;
            survive *= bridge_survival(prev, x, self.ln_b, v);
            if survive == 0.0 {
                return 0.0;
            }
            prev = x;
        }
        self.discount * survive * self.contract.payoff(prev.exp())
    }
}

/// Price by simulation. Batches run in parallel; each path owns its random
/// streams and batch moments are merged in index order, so the estimate does
/// not depend on the thread count.
pub fn price_mc(contract: &OptionContract, params: &ModelParams, cfg: &McConfig) -> Result<PricingResult> {
    contract.validate()?;
    params.validate()?;
    cfg.validate()?;
    let steps = cfg.steps_for(contract);
    let knocked = matches!((contract.kind, contract.barrier), (OptionKind::DownAndOutCall, Some(b)) if contract.spot <= b);
    let discount = (-params.rate * contract.maturity).exp();
    let n_controls = match cfg.control_variate {
        ControlVariate::None => 0,
        ControlVariate::BsBarrierAnalytic => 1,
        ControlVariate::BsBarrierAndForward => 2,
    };
    if n_controls > 0 && contract.kind != OptionKind::DownAndOutCall {
        return Err(invalid("control_variate", "the analytic control applies to down-and-out calls"));
    }
    let control = (n_controls > 0).then(|| {
        let sigma = (gaussian_variance(contract.maturity, params) / contract.maturity).sqrt();
        ControlSpec {
            sigma,
            drift: params.rate - 0.5 * sigma * sigma,
            ln_s0: contract.spot.ln(),
        }
    });
    let mut diag = McDiagnostics {
        n_paths: cfg.n_paths,
        steps,
        seed: cfg.seed,
        antithetic: cfg.antithetic,
        measure: cfg.measure,
        cv_coefficients: Vec::new(),
        control_mean: None,
        plain_se: 0.0,
        batches: Vec::new(),
    };
    if knocked {
        return Ok(PricingResult {
            price: 0.0,
            std_err: Some(0.0),
            method: Method::MonteCarlo,
            diagnostics: Diagnostics::MonteCarlo(diag),
        });
    }
    let sim = PathSimulator::new(
        params,
        contract.spot,
        contract.maturity,
        steps,
        cfg.seed,
        SimMeasure::RiskNeutral(cfg.measure),
    )?
    .with_antithetic(cfg.antithetic);
    let eval = Evaluator {
        contract,
        discount,
        ln_b: contract.barrier.map_or(f64::NEG_INFINITY, f64::ln),
        steps,
        dt: sim.dt(),
        sigma0: params.sigma0,
        bridge: cfg.bridge_correction,
        control,
    };
    let n_batches = cfg.n_paths.div_ceil(BATCH_SIZE);
    let batches: Vec<Moments> = (0..n_batches)
        .into_par_iter()
        .map(|bi| {
            let first = bi * BATCH_SIZE;
            let count = BATCH_SIZE.min(cfg.n_paths - first);
            let b = sim.batch(first as u64, count);
            let mut m = Moments::default();
            // antithetic partners are averaged into one sample
            let group = if cfg.antithetic { 2 } else { 1 };
            for g in (0..count).step_by(group) {
                let mut v = [0.0; 3];
                for p in g..g + group {
                    v[0] += eval.target(&b, p);
                    if n_controls > 0 {
                        v[1] += eval.control(&b, p);
                    }
                    if n_controls > 1 {
                        v[2] += eval.forward(&b, p);
                    }
                }
                m.push(v.map(|x| x / group as f64));
            }
            m
        })
        .collect();
    let total = pairwise_merge(&batches);
    diag.plain_se = total.se_y();
    let (price, se) = match control {
        Some(c) => {
            let means = [bs_barrier_analytic(contract, c.sigma, params.rate)?, contract.spot];
            let (coef, resid) = total.regress(n_controls);
            let shift: f64 = coef.iter().enumerate().map(|(i, b)| b * (total.mean[i + 1] - means[i])).sum();
            diag.cv_coefficients = coef;
            diag.control_mean = Some(means[0]);
            (total.mean_y() - shift, (resid / (total.n - 1.0) / total.n).sqrt())
        }
        None => (total.mean_y(), total.se_y()),
    };
    diag.batches = batches;
    Ok(PricingResult {
        price,
        std_err: Some(se),
        method: Method::MonteCarlo,
        diagnostics: Diagnostics::MonteCarlo(diag),
    })
}

/// Mean and standard error of `e^{−rt}S_t` at the requested times, from
/// one set of paths.
pub fn discounted_means(
    params: &ModelParams,
    spot: f64,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
    mode: RiskNeutralMode,
) -> Result<Vec<(f64, f64, f64)>> {
    let sim = PathSimulator::new(params, spot, horizon, steps, seed, SimMeasure::RiskNeutral(mode))?;
    let times = sim.times().to_vec();
    let n_batches = n_paths.div_ceil(BATCH_SIZE);
    let per_batch: Vec<Vec<Moments>> = (0..n_batches)
        .into_par_iter()
        .map(|bi| {
            let first = bi * BATCH_SIZE;
            let count = BATCH_SIZE.min(n_paths - first);
            let b = sim.batch(first as u64, count);
            let mut m = vec![Moments::default(); steps];
            for p in 0..count {
                let lp = b.column(&b.log_prices, p);
                for (j, mj) in m.iter_mut().enumerate() {
                    let t = times[j + 1];
                    mj.push([(lp[j + 1] - params.rate * t).exp(), 0.0, 0.0]);
                }
            }
            m
        })
        .collect();
    Ok((0..steps)
        .map(|j| {
            let col: Vec<Moments> = per_batch.iter().map(|b| b[j]).collect();
            let m = pairwise_merge(&col);
            (times[j + 1], m.mean_y(), m.se_y())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let data: Vec<(f64, f64)> = (0..1000).map(|i| ((i as f64 * 0.37).sin() * 5.0, (i as f64 * 0.11).cos())).collect();
        let mut seq = Moments::default();
        data.iter().for_each(|(y, x)| seq.push([*y, *x, y * x]));
        let parts: Vec<Moments> = data
            .chunks(77)
            .map(|c| {
                let mut m = Moments::default();
                c.iter().for_each(|(y, x)| m.push([*y, *x, y * x]));
                m
            })
            .collect();
        let merged = pairwise_merge(&parts);
        for i in 0..3 {
            assert!((merged.mean[i] - seq.mean[i]).abs() < 1e-12);
            for j in 0..3 {
                assert!((merged.m2[i][j] - seq.m2[i][j]).abs() < 1e-9 * seq.m2[i][j].abs().max(1.0));
            }
        }
    }

    #[test]
    fn knocked_out_at_start_is_zero() {
        let c = OptionContract::down_and_out_call(3700.0, 4200.0, 3800.0, 0.5);
        let r = price_mc(&c, &ModelParams::reference(0.02), &McConfig::default()).unwrap();
        assert_eq!(r.price, 0.0);
        let c = OptionContract::down_and_out_call(100.0, 105.0, 100.0, 0.5);
        assert_eq!(bs_barrier_analytic(&c, 0.2, 0.02).unwrap(), 0.0);
    }

    #[test]
    fn analytic_barrier_tends_to_vanilla() {
        let c = OptionContract::down_and_out_call(100.0, 100.0, 1e-6, 1.0);
        let v = crate::closed_form::bs_call(100.0, 100.0, 1.0, 0.05, 0.2);
        assert!((bs_barrier_analytic(&c, 0.2, 0.05).unwrap() - v).abs() < 1e-10);
    }
}
