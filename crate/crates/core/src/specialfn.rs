//! Gamma and Mittag-Leffler functions, Grünwald-Letnikov weights.

use crate::error::{invalid, Error, Result};
use num_complex::Complex64;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

/// Grünwald-Letnikov weights `ω_k = (−1)^k C(γ, k)` for a fixed order γ.
#[derive(Clone, Debug, PartialEq)]
pub struct FracWeightTable {
    order: f64,
    weights: Vec<f64>,
}

impl FracWeightTable {
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Running sums `Σ_{j≤k} ω_j`.
    pub fn partial_sums(&self) -> Vec<f64> {
        self.weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect()
    }
}

/// Weights table of length `count` generated by the multiplicative recurrence.
pub fn gl_weights(order: f64, count: usize) -> Result<FracWeightTable> {
    if !(order > 0.0 && order < 1.0) {
        return Err(invalid("order", format!("{order} outside (0, 1)")));
    }
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    Ok(FracWeightTable {
        order,
        weights: weight_recurrence(order, count),
    })
}

/// Same recurrence without the range check; order 1 gives backward differences.
pub(crate) fn weight_recurrence(order: f64, count: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(count);
    w.push(1.0);
    for k in 1..count {
        let prev = w[k - 1];
        w.push(prev * (1.0 - (order + 1.0) / k as f64));
    }
    w
}

/// Grünwald-Letnikov approximation of the Riemann-Liouville derivative on a
/// uniform grid: `out[n] = dt^{−γ} Σ_{k≤n} ω_k f[n−k]`.
pub fn rl_derivative_gl(samples: &[f64], order: f64, dt: f64) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(invalid("samples", "must be non-empty"));
    }
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let table = gl_weights(order, samples.len())?;
    let w = table.weights();
    let scale = dt.powf(-order);
    Ok((0..samples.len())
        .map(|n| scale * (0..=n).map(|k| w[k] * samples[n - k]).sum::<f64>())
        .collect())
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Euler gamma on the complex plane (Lanczos, with reflection for Re z < ½).
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::GammaPole(z));
    }
    if z.re < 0.5 {
        let s = (z * PI).sin();
        if s.norm() == 0.0 {
            return Err(Error::GammaPole(z));
        }
        return Ok(Complex64::new(PI, 0.0) / (s * lanczos(Complex64::new(1.0, 0.0) - z)));
    }
    Ok(lanczos(z))
}

fn lanczos(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    // t^{z+1/2} e^{-t} computed in log form to avoid overflow at large |z|
    let log = (z + 0.5) * t.ln() - t;
    (2.0 * PI).sqrt() * log.exp() * x
}

/// Default absolute tolerance for Mittag-Leffler values.
pub const ML_DEFAULT_TOL: f64 = 1e-8;

/// Largest series term magnitude tolerated before switching to the contour
/// representation; above it cancellation eats the accuracy budget.
const SERIES_MAX_TERM: f64 = 1e3;
const SERIES_MAX_TERMS: usize = 2_000;

/// Evaluator for the two-parameter Mittag-Leffler function `E_{α,β}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MittagLeffler {
    pub alpha: f64,
    pub beta: f64,
    pub target_abs_error: f64,
}

/// Which representation produced a Mittag-Leffler value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MlRegime {
    Series,
    Contour,
    Exponential,
}

impl MittagLeffler {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("{alpha} must be positive")));
        }
        if !(beta > 0.0) {
            return Err(invalid("beta", format!("{beta} must be positive")));
        }
        Ok(Self {
            alpha,
            beta,
            target_abs_error: ML_DEFAULT_TOL,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.target_abs_error = tol;
        self
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        self.eval_with_regime(z).map(|(v, _)| v)
    }

    pub fn eval_with_regime(&self, z: Complex64) -> Result<(Complex64, MlRegime)> {
        let (a, b) = (self.alpha, self.beta);
        if z.norm() == 0.0 {
            return Ok((Complex64::new((-ln_gamma(b)).exp(), 0.0), MlRegime::Series));
        }
        if a == 1.0 && b == 1.0 {
            return Ok((z.exp(), MlRegime::Exponential));
        }
        if let Some(v) = self.series(z)? {
            return Ok((v, MlRegime::Series));
        }
        if a > 1.0 {
            // the contour form below assumes at most one pole on the principal sheet
            return Err(Error::MittagLeffler {
                regime: "series",
                terms: 0,
                change: f64::INFINITY,
            });
        }
        let coarse = self.contour(z, 32);
        let fine = self.contour(z, 48);
        let change = (fine - coarse).norm();
        if !fine.is_finite() || change > self.target_abs_error.max(1e-12 * fine.norm()) {
            return Err(Error::MittagLeffler {
                regime: "contour",
                terms: 97,
                change,
            });
        }
        Ok((fine, MlRegime::Contour))
    }

    /// Power series, or `None` when the largest term makes it unreliable.
    fn series(&self, z: Complex64) -> Result<Option<Complex64>> {
        let (a, b) = (self.alpha, self.beta);
        let lr = z.norm().ln();
        let log_term = |k: usize| k as f64 * lr - ln_gamma(a * k as f64 + b);
        // the log-term is concave in k, so scan to its peak
        let mut peak = log_term(0);
        let mut k_peak = 0;
        while k_peak + 1 < SERIES_MAX_TERMS {
            let t = log_term(k_peak + 1);
            if t < peak {
                break;
            }
            peak = t;
            k_peak += 1;
        }
        if peak > SERIES_MAX_TERM.ln() {
            return Ok(None);
        }
        let cutoff = (self.target_abs_error * 1e-6).ln();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut comp = Complex64::new(0.0, 0.0);
        let mut zk = Complex64::new(1.0, 0.0);
        for k in 0..SERIES_MAX_TERMS {
            let lt = log_term(k);
            let term = zk * (-ln_gamma(a * k as f64 + b)).exp();
            // Neumaier compensated summation, per component
            let t = sum + term;
            comp.re += if sum.re.abs() >= term.re.abs() {
                (sum.re - t.re) + term.re
            } else {
                (term.re - t.re) + sum.re
            };
            comp.im += if sum.im.abs() >= term.im.abs() {
                (sum.im - t.im) + term.im
            } else {
                (term.im - t.im) + sum.im
            };
            sum = t;
            if k > k_peak && lt < cutoff {
                return Ok(Some(sum + comp));
            }
            zk *= z;
        }
        Err(Error::MittagLeffler {
            regime: "series",
            terms: SERIES_MAX_TERMS,
            change: log_term(SERIES_MAX_TERMS).exp(),
        })
    }

    /// Inverse Laplace transform of `s^{α−β}/(s^α − z)` at t = 1 on a
    /// parabolic contour, with the principal-sheet pole taken out analytically.
    fn contour(&self, z: Complex64, n: usize) -> Complex64 {
        let (a, b) = (self.alpha, self.beta);
        let pole = if z.arg().abs() < a * PI {
            Some(z.powf(1.0 / a))
        } else {
            None
        };
        let residue = |p: Complex64| p.powf(1.0 - b) / a;
        let nf = n as f64;
        let h = 3.0 / nf;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -(n as i64)..=(n as i64) {
            let u = k as f64 * h;
            let s = nf * Complex64::new(0.1309 - 0.1194 * u * u, 0.25 * u);
            let ds = nf * Complex64::new(-2.0 * 0.1194 * u, 0.25);
            let mut f = s.powf(a - b) / (s.powf(a) - z);
            if let Some(p) = pole {
                f -= residue(p) / (s - p);
            }
            acc += s.exp() * f * ds;
        }
        let mut v = acc * h / Complex64::new(0.0, 2.0 * PI);
        if let Some(p) = pole {
            v += residue(p) * p.exp();
        }
        v
    }
}

/// `E_{α,β}(z)` at the default tolerance.
pub fn mittag_leffler(alpha: f64, beta: f64, z: Complex64) -> Result<Complex64> {
    MittagLeffler::new(alpha, beta)?.eval(z)
}

/// Real gamma function (positive and non-integer negative arguments).
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}
