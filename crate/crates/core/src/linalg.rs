//! Sparse linear algebra for the implicit solver and dense factorisation for
//! path simulation.

use crate::error::{Error, Result};
use crate::scalar::Real;
use nalgebra::DMatrix;

pub trait LinearOperator<T> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
    fn diagonal(&self) -> Vec<T>;
}

/// Tridiagonal matrix; `lower[i]` multiplies `x[i−1]`, `upper[i]` multiplies `x[i+1]`.
#[derive(Clone, Debug)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![T::zero(); n],
            diag: vec![T::zero(); n],
            upper: vec![T::zero(); n],
        }
    }

    /// Direct Thomas solve, used as a reference in tests.
    pub fn solve_thomas(&self, rhs: &[T]) -> Vec<T> {
        let n = self.diag.len();
        let mut c = vec![T::zero(); n];
        let mut d = vec![T::zero(); n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let m = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / m;
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / m;
        }
        let mut x = vec![T::zero(); n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}

impl<T: Real> LinearOperator<T> for Tridiagonal<T> {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * x[i + 1];
            }
            y[i] = v;
        }
    }

    fn diagonal(&self) -> Vec<T> {
        self.diag.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiCgStabConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BiCgStabConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 2_000,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final relative residual of the primal part.
    pub residual: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

fn part_norms<T: Real>(v: &[T]) -> [f64; 4] {
    let mut n = [0.0; 4];
    for x in v {
        for (acc, p) in n.iter_mut().zip(x.parts()) {
            *acc += p * p;
        }
    }
    n.map(f64::sqrt)
}

/// Per-component relative residuals, so derivative parts converge too.
fn relative_residual<T: Real>(r: &[T], scale: &[f64; 4]) -> f64 {
    let rn = part_norms(r);
    let floor = scale[0].max(f64::MIN_POSITIVE) * 1e-6;
    rn.iter()
        .zip(scale)
        .map(|(r, s)| r / s.max(floor))
        .fold(0.0, f64::max)
}

/// Jacobi-preconditioned BiCGSTAB. `x` holds the initial guess on entry.
/// One restart from the current iterate is attempted on breakdown or stall.
pub fn bicgstab<T: Real, A: LinearOperator<T>>(
    a: &A,
    b: &[T],
    x: &mut [T],
    cfg: &BiCgStabConfig,
) -> SolveStats {
    let n = a.dim();
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d.val() != 0.0 { T::one() / d } else { T::one() })
        .collect();
    let scale = part_norms(b);
    let mut stats = SolveStats::default();
    if scale.iter().all(|s| *s == 0.0) {
        x.iter_mut().for_each(|v| *v = T::zero());
        stats.converged = true;
        return stats;
    }
    let mut r = vec![T::zero(); n];
    let mut tmp = vec![T::zero(); n];
    for _attempt in 0..2 {
        a.apply(x, &mut tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
        let mut res = relative_residual(&r, &scale);
        stats.history.push(res);
        if res <= cfg.tol {
            stats.residual = res;
            stats.converged = true;
            return stats;
        }
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
        let mut v = vec![T::zero(); n];
        let mut p = vec![T::zero(); n];
        let mut p_hat = vec![T::zero(); n];
        let mut s = vec![T::zero(); n];
        let mut s_hat = vec![T::zero(); n];
        let mut t = vec![T::zero(); n];
        let budget = cfg.max_iter / 2;
        for _ in 0..budget {
            stats.iterations += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.val().abs() < 1e-300 || omega.val() == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
                p_hat[i] = inv_diag[i] * p[i];
            }
            a.apply(&p_hat, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.val() == 0.0 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if relative_residual(&s, &scale) <= cfg.tol {
                for i in 0..n {
                    x[i] += alpha * p_hat[i];
                }
                r.copy_from_slice(&s);
                res = relative_residual(&r, &scale);
                stats.history.push(res);
                break;
            }
            for i in 0..n {
                s_hat[i] = inv_diag[i] * s[i];
            }
            a.apply(&s_hat, &mut t);
            let tt = dot(&t, &t);
            omega = if tt.val() != 0.0 { dot(&t, &s) / tt } else { T::zero() };
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            res = relative_residual(&r, &scale);
            stats.history.push(res);
            if res <= cfg.tol || !res.is_finite() {
                break;
            }
        }
        if res <= cfg.tol {
            // confirm with the true residual, guarding against drift in the recurrence
            a.apply(x, &mut tmp);
            for i in 0..n {
                r[i] = b[i] - tmp[i];
            }
            res = relative_residual(&r, &scale);
            if res <= cfg.tol * 10.0 {
                stats.residual = res;
                stats.converged = true;
                return stats;
            }
        }
        stats.residual = res;
        if !res.is_finite() {
            break;
        }
    }
    stats
}

/// Lower Cholesky factor with diagonal jitter retries for nearly singular
/// covariance matrices.
pub fn cholesky_with_jitter(cov: &DMatrix<f64>, max_attempts: usize) -> Result<DMatrix<f64>> {
    let scale = cov.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let mut jitter = 0.0;
    for attempt in 0..=max_attempts {
        let mut m = cov.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(ch) = m.cholesky() {
            if attempt > 0 {
                log::warn!("covariance factorized with jitter {jitter:.3e}");
            }
            return Ok(ch.l());
        }
        jitter = if jitter == 0.0 { 1e-14 * scale } else { jitter * 10.0 };
    }
    Err(Error::Cholesky {
        attempts: max_attempts,
    })
}
