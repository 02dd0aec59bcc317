//! The smfBm-J driver: covariance structure and exact path simulation.

use crate::error::{invalid, Result};
use crate::io::{fmt_f64, Provenance};
use crate::linalg::cholesky_with_jitter;
use crate::measure::{emm_drift, esscher_root, jump_kappa, GaussianJumps, MeasureShift, RiskNeutralMode};
use crate::model::ModelParams;
use crate::rng::{gaussian_stream, jump_stream};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use std::io::Write;

/// Covariance of sub-fractional Brownian motion.
pub fn sfbm_covariance(t: f64, s: f64, hurst: f64) -> f64 {
    if t <= 0.0 || s <= 0.0 {
        return 0.0;
    }
    let h2 = 2.0 * hurst;
    t.powf(h2) + s.powf(h2) - 0.5 * ((t + s).powf(h2) + (t - s).abs().powf(h2))
}

/// Variance of the Gaussian part `σ₀W_t + σ_H S^H_t`.
pub fn gaussian_variance(t: f64, params: &ModelParams) -> f64 {
    let frac = if params.sigma_h > 0.0 {
        params.sigma_h * params.sigma_h * sfbm_covariance(t, t, params.hurst)
    } else {
        0.0
    };
    params.sigma0 * params.sigma0 * t + frac
}

/// Covariance of `σ₀W + σ_H S^H + J` with `J` the compound Poisson sum
/// compensated by `λ t E[Y]`.
pub fn smfbm_covariance(t: f64, s: f64, params: &ModelParams) -> f64 {
    let m = t.min(s).max(0.0);
    let frac = if params.sigma_h > 0.0 {
        params.sigma_h * params.sigma_h * sfbm_covariance(t, s, params.hurst)
    } else {
        0.0
    };
    let second_moment = params.sigma_y * params.sigma_y + params.mu_y * params.mu_y;
    params.sigma0 * params.sigma0 * m + frac + params.lambda * m * second_moment
}

/// Measure under which paths are generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SimMeasure {
    Physical,
    RiskNeutral(RiskNeutralMode),
}

/// One simulated path on the uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub path_id: u64,
    pub times: Vec<f64>,
    pub log_prices: Vec<f64>,
    pub jump_count: u32,
    /// Number of jumps up to each grid time.
    pub jumps_so_far: Vec<u32>,
}

/// Paths `first..first+n` stored column-wise: entry `p * (steps+1) + j` is time `t_j`.
#[derive(Clone, Debug)]
pub struct PathBatch {
    pub first_path: u64,
    pub n_paths: usize,
    pub steps: usize,
    pub log_prices: Vec<f64>,
    /// Brownian component `W_t` (unscaled).
    pub brownian: Vec<f64>,
    /// Gaussian part `σ₀W_t + σ_H S^H_t`.
    pub gaussian: Vec<f64>,
    /// Sum of jump sizes up to `t_j`.
    pub jump_sums: Vec<f64>,
    pub jumps_so_far: Vec<u32>,
}

impl PathBatch {
    pub fn column<'a>(&self, data: &'a [f64], p: usize) -> &'a [f64] {
        let m = self.steps + 1;
        &data[p * m..(p + 1) * m]
    }
}

pub const BATCH_SIZE: usize = 256;

/// Exact simulator for log-prices driven by smfBm-J on a uniform grid.
#[derive(Clone, Debug)]
pub struct PathSimulator {
    steps: usize,
    horizon: f64,
    times: Vec<f64>,
    chol: Option<DMatrix<f64>>,
    half_var: Vec<f64>,
    ln_s0: f64,
    drift: f64,
    sigma0: f64,
    sigma_h: f64,
    intensity: f64,
    law: GaussianJumps,
    compensator: f64,
    seed: u64,
    antithetic: bool,
}

impl PathSimulator {
    pub fn new(
        params: &ModelParams,
        s0: f64,
        horizon: f64,
        steps: usize,
        seed: u64,
        measure: SimMeasure,
    ) -> Result<Self> {
        params.validate()?;
        if steps == 0 {
            return Err(invalid("steps", "must be at least 1"));
        }
        if !(horizon > 0.0) {
            return Err(invalid("horizon", "must be positive"));
        }
        if !(s0 > 0.0) {
            return Err(invalid("s0", "must be positive"));
        }
        let dt = horizon / steps as f64;
        let times: Vec<f64> = (0..=steps).map(|j| j as f64 * dt).collect();
        let chol = if params.sigma_h > 0.0 {
            let cov = DMatrix::from_fn(steps, steps, |i, j| {
                sfbm_covariance(times[i + 1], times[j + 1], params.hurst)
            });
            Some(cholesky_with_jitter(&cov, 8)?)
        } else {
            None
        };
        let kappa = jump_kappa(params.mu_y, params.sigma_y);
        let law = GaussianJumps {
            mu: params.mu_y,
            sigma: params.sigma_y,
        };
        let (mu, intensity, law) = match measure {
            SimMeasure::Physical => (params.mu, params.lambda, law),
            SimMeasure::RiskNeutral(RiskNeutralMode::Naive) => (params.rate, params.lambda, law),
            SimMeasure::RiskNeutral(RiskNeutralMode::Tilted) => {
                let shift = MeasureShift::neutral(params, horizon)?;
                let eta = if params.lambda > 0.0 {
                    esscher_root(params.mu_y, params.sigma_y)?
                } else {
                    0.0
                };
                (emm_drift(params, &shift), shift.lambda_star, law.tilted(eta))
            }
        };
        let half_var = times.iter().map(|&t| 0.5 * gaussian_variance(t, params)).collect();
        Ok(Self {
            steps,
            horizon,
            times,
            chol,
            half_var,
            ln_s0: s0.ln(),
            drift: mu - params.lambda * kappa,
            sigma0: params.sigma0,
            sigma_h: params.sigma_h,
            intensity,
            law,
            compensator: params.lambda * params.mu_y,
            seed,
            antithetic: false,
        })
    }

    /// Pair path `2g+1` with the negated Gaussian draws of path `2g`.
    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Generate paths `first .. first + count`.
    pub fn batch(&self, first: u64, count: usize) -> PathBatch {
        let m = self.steps;
        let stride = m + 1;
        let sqrt_dt = self.dt().sqrt();
        let mut z_w = vec![0.0; m * count];
        let mut z_h = DMatrix::<f64>::zeros(m, if self.chol.is_some() { count } else { 0 });
        for p in 0..count {
            let id = first + p as u64;
            let (group, sign) = if self.antithetic {
                (id / 2, if id % 2 == 1 { -1.0 } else { 1.0 })
            } else {
                (id, 1.0)
            };
            let mut rng = gaussian_stream(self.seed, group);
            for z in &mut z_w[p * m..(p + 1) * m] {
                let x: f64 = rng.sample(StandardNormal);
                *z = sign * x;
            }
            if self.chol.is_some() {
                for j in 0..m {
                    let x: f64 = rng.sample(StandardNormal);
                    z_h[(j, p)] = sign * x;
                }
            }
        }
        let s_h = self.chol.as_ref().map(|l| lower_triangular_product(l, &z_h));

        let mut batch = PathBatch {
            first_path: first,
            n_paths: count,
            steps: m,
            log_prices: vec![0.0; stride * count],
            brownian: vec![0.0; stride * count],
            gaussian: vec![0.0; stride * count],
            jump_sums: vec![0.0; stride * count],
            jumps_so_far: vec![0; stride * count],
        };
        let poisson = if self.intensity > 0.0 {
            Some(Poisson::new(self.intensity * self.horizon).expect("positive mean"))
        } else {
            None
        };
        let mut jump_times: Vec<(usize, f64)> = Vec::new();
        let dt = self.dt();
        for p in 0..count {
            let id = first + p as u64;
            let base = p * stride;
            let mut w = 0.0;
            for j in 1..=m {
                w += sqrt_dt * z_w[p * m + j - 1];
                batch.brownian[base + j] = w;
                let mut g = self.sigma0 * w;
                if let Some(sh) = &s_h {
                    g += self.sigma_h * sh[(j - 1, p)];
                }
                batch.gaussian[base + j] = g;
            }
            jump_times.clear();
            if let Some(pois) = &poisson {
                let mut rng = jump_stream(self.seed, id);
                let n = pois.sample(&mut rng) as usize;
                for _ in 0..n {
                    let t: f64 = rng.random::<f64>() * self.horizon;
                    let z: f64 = rng.sample(StandardNormal);
                    let bin = ((t / dt).ceil() as usize).clamp(1, m);
                    jump_times.push((bin, self.law.mu + self.law.sigma * z));
                }
                jump_times.sort_by_key(|a| a.0);
            }
            let mut k = 0;
            let (mut jsum, mut jcount) = (0.0, 0u32);
            for j in 0..=m {
                while k < jump_times.len() && jump_times[k].0 == j {
                    jsum += jump_times[k].1;
                    jcount += 1;
                    k += 1;
                }
                batch.jump_sums[base + j] = jsum;
                batch.jumps_so_far[base + j] = jcount;
                let t = self.times[j];
                batch.log_prices[base + j] =
                    self.ln_s0 + self.drift * t - self.half_var[j] + batch.gaussian[base + j] + jsum;
            }
        }
        batch
    }

    /// Values of the driver `σ₀W + σ_H S^H + Σ Y − λ t E[Y]` for one batch.
    pub fn driver(&self, batch: &PathBatch) -> Vec<f64> {
        let stride = batch.steps + 1;
        (0..batch.n_paths * stride)
            .map(|i| {
                let t = self.times[i % stride];
                batch.gaussian[i] + batch.jump_sums[i] - self.compensator * t
            })
            .collect()
    }

    /// Lazy stream of `n_paths` samples generated batch by batch.
    pub fn paths(&self, n_paths: usize) -> impl Iterator<Item = PathSample> + '_ {
        let mut next = 0usize;
        let mut buffer: std::vec::IntoIter<PathSample> = Vec::new().into_iter();
        std::iter::from_fn(move || loop {
            if let Some(s) = buffer.next() {
                return Some(s);
            }
            if next >= n_paths {
                return None;
            }
            let count = BATCH_SIZE.min(n_paths - next);
            let b = self.batch(next as u64, count);
            next += count;
            buffer = (0..count)
                .map(|p| PathSample {
                    path_id: b.first_path + p as u64,
                    times: self.times.clone(),
                    log_prices: b.column(&b.log_prices, p).to_vec(),
                    jump_count: b.jumps_so_far[(p + 1) * (b.steps + 1) - 1],
                    jumps_so_far: b.jumps_so_far[p * (b.steps + 1)..(p + 1) * (b.steps + 1)].to_vec(),
                })
                .collect::<Vec<_>>()
                .into_iter();
        })
    }
}

/// `L · Z` for lower-triangular `L`, skipping the zero upper blocks.
fn lower_triangular_product(l: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    const BLOCK: usize = 128;
    let (m, n) = (l.nrows(), z.ncols());
    let mut out = DMatrix::<f64>::zeros(m, n);
    let mut i0 = 0;
    while i0 < m {
        let i1 = (i0 + BLOCK).min(m);
        let lb = l.view((i0, 0), (i1 - i0, i1));
        let zb = z.view((0, 0), (i1, n));
        out.view_mut((i0, 0), (i1 - i0, n)).gemm(1.0, &lb, &zb, 0.0);
        i0 = i1;
    }
    out
}

/// Convenience wrapper returning the lazy path stream.
pub fn simulate_paths(
    params: &ModelParams,
    s0: f64,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    seed: u64,
    measure: SimMeasure,
) -> Result<Vec<PathSample>> {
    let sim = PathSimulator::new(params, s0, horizon, steps, seed, measure)?;
    Ok(sim.paths(n_paths).collect())
}

/// Path dump with columns `path_id,t,log_price,n_jumps_so_far`, streamed
/// row by row.
pub fn write_paths<W: Write, I: IntoIterator<Item = PathSample>>(
    out: W,
    prov: Option<&Provenance>,
    paths: I,
) -> Result<()> {
    let mut out = out;
    if let Some(p) = prov {
        writeln!(out, "{}", p.header_line())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "t", "log_price", "n_jumps_so_far"])?;
    for q in paths {
        for ((t, x), n) in q.times.iter().zip(&q.log_prices).zip(&q.jumps_so_far) {
            w.write_record([q.path_id.to_string(), fmt_f64(*t), fmt_f64(*x), n.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
