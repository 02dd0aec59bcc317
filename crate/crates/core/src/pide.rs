//! Implicit Grünwald-Letnikov solver for the fractional integro-PDE in log
//! price and remaining time `τ`:
//!
//! `D^α V = ½σ₀²(V_xx − V_x) + (r − λκ)V_x − rV + σ₀σ_H ∂_x D^H V + λ(E[V(x+Y)] − V)`
//!
//! with Caputo derivatives of order `α = H` (first order in the classical
//! limit). Both fractional terms share one weight table because the orders
//! coincide. Diffusion, advection, reaction, the `−λV` part and the current
//! layer of each convolution are implicit; the jump expectation and the
//! convolution history are explicit.

use crate::error::{invalid, Error, Result};
use crate::linalg::{bicgstab, BiCgStabConfig, Tridiagonal};
use crate::model::{Diagnostics, Method, ModelParams, OptionContract, OptionKind, PricingResult};
use crate::quadrature::gauss_hermite;
use crate::scalar::Real;
use crate::specialfn::{gamma, weight_recurrence};
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;
use crate::io::{fmt_f64, write_table, Provenance};
use std::fmt;
use std::io::Write;

/// Log-price and time discretisation.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_space: usize,
    pub n_time: usize,
    pub maturity: f64,
    /// Spacing ratio between neighbouring cells inside the cluster zone; 1 is uniform.
    pub clustering_q: f64,
    /// Number of cells, counted from `x_min`, over which spacing grows by `1/q`.
    pub cluster_cells: usize,
}

/// Half-width of the European domain in standard deviations of the log price.
const WIDTH_SDS: f64 = 7.0;

fn effective_sd(params: &ModelParams, maturity: f64) -> f64 {
    // the time-fractional equation spreads mass like T^α/Γ(1+α)
    let alpha = params.time_order();
    let t_eff = maturity.powf(alpha) / gamma(1.0 + alpha);
    let var = params.sigma0 * params.sigma0
        + params.sigma_h * params.sigma_h
        + params.lambda * (params.mu_y * params.mu_y + params.sigma_y * params.sigma_y);
    (var * t_eff.max(maturity)).sqrt()
}

impl GridSpec {
    pub fn uniform(x_min: f64, x_max: f64, n_space: usize, n_time: usize, maturity: f64) -> Result<Self> {
        let g = Self {
            x_min,
            x_max,
            n_space,
            n_time,
            maturity,
            clustering_q: 1.0,
            cluster_cells: 0,
        };
        g.validate()?;
        Ok(g)
    }

    /// Uniform grid around the spot and strike, shifted so that `ln S₀` sits
    /// in the middle of a cell.
    pub fn european(contract: &OptionContract, params: &ModelParams, n_space: usize, n_time: usize) -> Result<Self> {
        contract.validate()?;
        let half = (WIDTH_SDS * effective_sd(params, contract.maturity)).max(0.5);
        let (xs, xk) = (contract.spot.ln(), contract.strike.ln());
        let (lo, hi) = (xs.min(xk) - half, xs.max(xk) + half);
        Self::uniform_centred(lo, hi, xs, n_space, n_time, contract.maturity)
    }

    /// Uniform grid with bounds near `[lo, hi]` whose spacing is `dx` and
    /// whose cell midpoint lies at `centre`.
    pub fn uniform_centred(lo: f64, hi: f64, centre: f64, n_space: usize, n_time: usize, maturity: f64) -> Result<Self> {
        if n_space < 5 {
            return Err(invalid("n_space", "must be at least 5"));
        }
        let dx = (hi - lo) / (n_space - 1) as f64;
        let j = ((centre - lo) / dx).floor();
        let x_min = centre - (j + 0.5) * dx;
        Self::uniform(x_min, x_min + (n_space - 1) as f64 * dx, n_space, n_time, maturity)
    }

    /// Grid starting exactly at `ln B`, refined geometrically towards it.
    pub fn barrier(contract: &OptionContract, params: &ModelParams, n_space: usize, n_time: usize, q: f64) -> Result<Self> {
        contract.validate()?;
        let b = contract
            .barrier
            .ok_or_else(|| invalid("barrier", "required for barrier grids"))?;
        let half = (WIDTH_SDS * effective_sd(params, contract.maturity)).max(0.5);
        let x_max = contract.spot.ln().max(contract.strike.ln()) + half;
        let g = Self {
            x_min: b.ln(),
            x_max,
            n_space,
            n_time,
            maturity: contract.maturity,
            clustering_q: q,
            cluster_cells: if q < 1.0 { n_space / 8 } else { 0 },
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max) || !self.x_min.is_finite() || !self.x_max.is_finite() {
            return Err(invalid("x_min", "grid bounds must be finite with x_min < x_max"));
        }
        if self.n_space < 5 {
            return Err(invalid("n_space", "must be at least 5"));
        }
        if self.n_time < 1 {
            return Err(invalid("n_time", "must be at least 1"));
        }
        if !(self.maturity > 0.0) {
            return Err(invalid("maturity", "must be positive"));
        }
        if !(self.clustering_q > 0.0 && self.clustering_q <= 1.0) {
            return Err(invalid("clustering_q", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.maturity / self.n_time as f64
    }

    pub fn s_max(&self) -> f64 {
        self.x_max.exp()
    }

    /// Node positions. Inside the cluster zone `h_{j+1} = h_j / q`.
    pub fn nodes(&self) -> Vec<f64> {
        let cells = self.n_space - 1;
        let zone = self.cluster_cells.min(cells);
        let rel: Vec<f64> = (0..cells)
            .map(|j| self.clustering_q.powi(-(j.min(zone) as i32)))
            .collect();
        let h0 = (self.x_max - self.x_min) / rel.iter().sum::<f64>();
        let mut x = Vec::with_capacity(self.n_space);
        x.push(self.x_min);
        let mut acc = self.x_min;
        for r in &rel[..cells - 1] {
            acc += h0 * r;
            x.push(acc);
        }
        x.push(self.x_max);
        x
    }

    /// `Δt / (c₀ Δx_min²)` with `c₀ = 1/(2σ₀²)`; values above 1 violate the
    /// step-size hypothesis of the stability estimate.
    pub fn step_ratio(&self, sigma0: f64) -> f64 {
        let x = self.nodes();
        let dx = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        self.dt() * 2.0 * sigma0 * sigma0 / (dx * dx)
    }
}

/// How the convolution history is accumulated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HistoryMode {
    #[default]
    Direct,
    /// Blocked FFT convolution; far history is refreshed once per block.
    Fft { block: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PideConfig {
    pub hermite_nodes: usize,
    pub history: HistoryMode,
    pub solver: BiCgStabConfig,
    pub keep_layers: bool,
}

impl Default for PideConfig {
    fn default() -> Self {
        Self {
            hermite_nodes: 16,
            history: HistoryMode::Direct,
            solver: BiCgStabConfig::default(),
            keep_layers: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveDiagnostics {
    pub iterations: Vec<usize>,
    pub residuals: Vec<f64>,
    /// Weighted norm `‖V^n‖_h` for `n = 0..=N`, `V^0` being the payoff.
    pub norms: Vec<f64>,
    pub n_space: usize,
    pub n_time: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub step_ratio: f64,
}

impl SolveDiagnostics {
    /// `max_n ‖V^n‖_h / ‖V^0‖_h`.
    pub fn stability_constant(&self) -> f64 {
        let base = self.norms.first().copied().unwrap_or(0.0);
        if base == 0.0 {
            return if self.norms.iter().all(|v| *v == 0.0) { 1.0 } else { f64::INFINITY };
        }
        self.norms.iter().fold(0.0, |m: f64, v| m.max(v / base))
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }
}

impl fmt::Display for SolveDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "grid={}x{} x=[{:.4},{:.4}] iterations={} max_residual={:.3e} stability_constant={:.6} step_ratio={:.3e}",
            self.n_space,
            self.n_time,
            self.x_min,
            self.x_max,
            self.total_iterations(),
            self.max_residual(),
            self.stability_constant(),
            self.step_ratio
        )
    }
}

/// `‖V‖_h² = Σ w_i V_i² Δx_i` with `w = (1 + e^{2x})^{−1}`.
pub fn weighted_norm<T: Real>(x: &[f64], v: &[T]) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let lo = if i > 0 { x[i - 1] } else { x[i] };
        let hi = if i + 1 < n { x[i + 1] } else { x[i] };
        let w = 1.0 / (1.0 + (2.0 * x[i]).exp());
        acc += w * v[i].val() * v[i].val() * 0.5 * (hi - lo);
    }
    acc.sqrt()
}

/// Three-point first and second derivative stencils on a nonuniform grid,
/// as `(left, centre, right)` coefficients.
fn stencils(x: &[f64], i: usize) -> ([f64; 3], [f64; 3]) {
    let hm = x[i] - x[i - 1];
    let hp = x[i + 1] - x[i];
    let d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
    let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
    (d1, d2)
}

/// Centred first derivative of `v` at interior nodes, zero at the ends.
fn first_derivative<T: Real>(x: &[f64], v: &[T], out: &mut [T]) {
    let n = x.len();
    out[0] = T::zero();
    out[n - 1] = T::zero();
    for i in 1..n - 1 {
        let (d1, _) = stencils(x, i);
        out[i] = v[i - 1] * T::cst(d1[0]) + v[i] * T::cst(d1[1]) + v[i + 1] * T::cst(d1[2]);
    }
}

/// Where a jump from node `i` lands.
#[derive(Clone, Copy, Debug)]
enum Target {
    Inside { left: usize, theta: f64 },
    Below(f64),
    Above(f64),
}

/// Gauss-Hermite expectation `E[V(x + Y)]` with linear interpolation between
/// nodes. Target positions use the primal jump parameters, so derivatives
/// with respect to the jump law are not propagated.
#[derive(Clone, Debug)]
pub struct JumpOperator {
    weights: Vec<f64>,
    targets: Vec<Target>,
    per_node: usize,
}

impl JumpOperator {
    pub fn new(x: &[f64], mu_y: f64, sigma_y: f64, nodes: usize) -> Self {
        let (u, w): (Vec<f64>, Vec<f64>) = if sigma_y > 0.0 {
            let rule = gauss_hermite(nodes);
            (rule.nodes, rule.weights.iter().map(|w| w / PI.sqrt()).collect())
        } else {
            (vec![0.0], vec![1.0])
        };
        let n = x.len();
        let (lo, hi) = (x[0], x[n - 1]);
        let mut targets = Vec::with_capacity(n * u.len());
        for &xi in x {
            for &uj in &u {
                let t = xi + mu_y + 2f64.sqrt() * sigma_y * uj;
                targets.push(if t < lo {
                    Target::Below(t)
                } else if t > hi {
                    Target::Above(t)
                } else {
                    let right = x.partition_point(|v| *v < t).clamp(1, n - 1);
                    let left = right - 1;
                    Target::Inside {
                        left,
                        theta: (t - x[left]) / (x[right] - x[left]),
                    }
                });
            }
        }
        Self {
            per_node: u.len(),
            weights: w,
            targets,
        }
    }

    /// `E[V(x_i + Y)]` for every node, with `outside(y)` supplying values
    /// off the grid.
    pub fn expectation<T: Real, F: Fn(f64) -> T>(&self, v: &[T], outside: F, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (j, w) in self.weights.iter().enumerate() {
                let val = match self.targets[i * self.per_node + j] {
                    Target::Inside { left, theta } => v[left] * T::cst(1.0 - theta) + v[left + 1] * T::cst(theta),
                    Target::Below(y) | Target::Above(y) => outside(y),
                };
                acc += val * T::cst(*w);
            }
            *o = acc;
        }
    }
}

/// `λ(E[V(x+Y)] − V(x))` on the grid.
pub fn jump_quadrature<F: Fn(f64) -> f64>(
    x: &[f64],
    values: &[f64],
    params: &ModelParams,
    nodes: usize,
    outside: F,
) -> Vec<f64> {
    if params.lambda == 0.0 {
        return vec![0.0; values.len()];
    }
    let op = JumpOperator::new(x, params.mu_y, params.sigma_y, nodes);
    let mut e = vec![0.0; values.len()];
    op.expectation(values, outside, &mut e);
    e.iter().zip(values).map(|(e, v)| params.lambda * (e - v)).collect()
}

/// Discrete discount factors `d_n` solving the scheme for a constant payoff.
fn discrete_discount<T: Real>(weights: &[f64], rate: T, lambda: T, dt: f64, alpha: f64, n_time: usize) -> Vec<T> {
    let scale = T::cst(dt.powf(-alpha));
    let mut d = vec![T::one()];
    for n in 1..=n_time {
        let mut hist = T::zero();
        for k in 1..=n {
            hist += (d[n - k] - T::one()) * T::cst(weights[k]);
        }
        let v = (scale * (T::one() - hist) + lambda * d[n - 1]) / (scale + rate + lambda);
        d.push(v);
    }
    d
}

/// Implicit operator and right-hand side builder for one solve.
#[derive(Clone, Debug)]
pub struct PideSystem<T> {
    pub x: Vec<f64>,
    pub matrix: Tridiagonal<T>,
    /// `σ₀σ_H Δt^{−α}`.
    cross: T,
    /// `Δt^{−α}`.
    scale: T,
    lambda: T,
    pub weights: Vec<f64>,
}

/// Assemble the step matrix
/// `A = Δt^{−α} I − L_h + (r + λ) I − σ₀σ_H Δt^{−α} δ_x`
/// with identity rows at both boundaries.
pub fn assemble_system<T: Real>(grid: &GridSpec, params: &ModelParams<T>) -> Result<PideSystem<T>> {
    grid.validate()?;
    params.validate()?;
    let x = grid.nodes();
    let alpha = params.time_order();
    let dt = grid.dt();
    let weights = weight_recurrence(alpha, grid.n_time + 1);
    let scale = T::cst(dt.powf(-alpha));
    let cross = if params.is_classical() {
        T::zero()
    } else {
        params.sigma0 * params.sigma_h * scale
    };
    let half_var = params.sigma0 * params.sigma0 * T::cst(0.5);
    let drift = params.rate - params.lambda * params.kappa() - half_var;
    let n = x.len();
    let mut m = Tridiagonal::zeros(n);
    m.diag[0] = T::one();
    m.diag[n - 1] = T::one();
    for i in 1..n - 1 {
        let (d1, d2) = stencils(&x, i);
        let coef = |k: usize| half_var * T::cst(d2[k]) + (drift + cross) * T::cst(d1[k]);
        m.lower[i] = -coef(0);
        m.diag[i] = scale + params.rate + params.lambda - coef(1);
        m.upper[i] = -coef(2);
    }
    Ok(PideSystem {
        x,
        matrix: m,
        cross,
        scale,
        lambda: params.lambda,
        weights,
    })
}

impl<T: Real> PideSystem<T> {
    /// Interior right-hand side
    /// `Δt^{−α}(V⁰ − h) + σ₀σ_HΔt^{−α} δ_x(h − V⁰) + λ E[V^{n−1}(x+Y)]`
    /// where `h` is the convolution history; boundary rows are set by the caller.
    pub fn rhs(&self, v0: &[T], hist: &[T], jump: &[T], out: &mut [T]) {
        let n = self.x.len();
        let diff: Vec<T> = hist.iter().zip(v0).map(|(h, v)| *h - *v).collect();
        let mut dd = vec![T::zero(); n];
        first_derivative(&self.x, &diff, &mut dd);
        for i in 1..n - 1 {
            out[i] = self.scale * (v0[i] - hist[i]) + self.cross * dd[i] + self.lambda * jump[i];
        }
    }
}

/// Result of a full march, retaining the final layer for interpolation.
#[derive(Clone, Debug)]
pub struct PideSolution<T> {
    pub x: Vec<f64>,
    pub values: Vec<T>,
    pub layers: Option<Vec<Vec<T>>>,
    pub discount: T,
    pub diagnostics: SolveDiagnostics,
}

impl<T: Real> PideSolution<T> {
    /// Four-point Lagrange interpolation in log price.
    pub fn value_at(&self, spot: T) -> T {
        let xs = spot.ln();
        let n = self.x.len();
        let right = self.x.partition_point(|v| *v <= xs.val()).clamp(1, n - 1);
        let start = (right as isize - 2).clamp(0, n as isize - 4) as usize;
        let mut acc = T::zero();
        for i in start..start + 4 {
            let mut l = T::one();
            for m in start..start + 4 {
                if m != i {
                    l *= (xs - T::cst(self.x[m])) / T::cst(self.x[i] - self.x[m]);
                }
            }
            acc += l * self.values[i];
        }
        acc
    }
}

/// History sums `h^n_i = Σ_{k=1}^{n} ω_k (V^{n−k}_i − V^0_i)`.
struct History<T> {
    mode: HistoryMode,
    weights: Vec<f64>,
    /// `U^m = V^m − V^0`, layer-major.
    diffs: Vec<Vec<T>>,
    far: Vec<Vec<T>>,
    far_start: usize,
}

impl<T: Real> History<T> {
    fn new(mode: HistoryMode, weights: Vec<f64>) -> Self {
        Self {
            mode,
            weights,
            diffs: Vec::new(),
            far: Vec::new(),
            far_start: 0,
        }
    }

    fn push(&mut self, u: Vec<T>) {
        self.diffs.push(u);
    }

    fn sum(&mut self, n: usize, out: &mut [T]) {
        let split = match self.mode {
            HistoryMode::Direct => 0,
            HistoryMode::Fft { block } => {
                let block = block.max(1);
                let b0 = (n / block) * block;
                if b0 >= block && b0 != self.far_start {
                    self.refresh_far(b0, block);
                }
                if b0 >= block {
                    b0
                } else {
                    0
                }
            }
        };
        let w = &self.weights;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = if split > 0 { self.far[n - split][i] } else { T::zero() };
            for m in split..n {
                acc += self.diffs[m][i] * T::cst(w[n - m]);
            }
            *o = acc;
        }
    }

    /// `far[j][i] = Σ_{m<b0} ω_{b0+j−m} U^m_i` for `j < block`, by FFT per
    /// node and per scalar component.
    fn refresh_far(&mut self, b0: usize, block: usize) {
        let nodes = self.diffs[0].len();
        let len = (b0 + block + b0).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let mut kernel = vec![Complex::new(0.0, 0.0); len];
        for (j, k) in kernel.iter_mut().enumerate().take((b0 + block).min(self.weights.len())) {
            *k = Complex::new(self.weights[j], 0.0);
        }
        fwd.process(&mut kernel);
        let mut far = vec![vec![T::zero(); nodes]; block];
        let mut buf = vec![Complex::new(0.0, 0.0); len];
        for i in 0..nodes {
            let mut parts = vec![[0.0; 4]; block];
            // two scalar components share one complex transform
            for pair in 0..2 {
                let (a, b) = (2 * pair, 2 * pair + 1);
                let active = (0..b0).any(|m| {
                    let p = self.diffs[m][i].parts();
                    p[a] != 0.0 || p[b] != 0.0
                });
                if !active {
                    continue;
                }
                buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                for m in 0..b0 {
                    let p = self.diffs[m][i].parts();
                    buf[m] = Complex::new(p[a], p[b]);
                }
                fwd.process(&mut buf);
                for (c, k) in buf.iter_mut().zip(&kernel) {
                    *c *= k;
                }
                inv.process(&mut buf);
                for (j, p) in parts.iter_mut().enumerate() {
                    let c = buf[b0 + j] / len as f64;
                    p[a] = c.re;
                    p[b] = c.im;
                }
            }
            for (j, p) in parts.into_iter().enumerate() {
                far[j][i] = T::from_parts(p);
            }
        }
        self.far = far;
        self.far_start = b0;
    }
}

fn boundary_values<T: Real>(kind: OptionKind, strike: f64, x_lo: f64, x_hi: f64, d: T) -> (T, T) {
    let k = T::cst(strike);
    match kind {
        OptionKind::Call | OptionKind::DownAndOutCall => (T::zero(), T::cst(x_hi.exp()) - k * d),
        OptionKind::Put => (k * d - T::cst(x_lo.exp()), T::zero()),
    }
}

fn outside_value<T: Real>(kind: OptionKind, strike: f64, y: f64, x_lo: f64, d: T) -> T {
    let k = T::cst(strike);
    match kind {
        OptionKind::Call | OptionKind::DownAndOutCall => {
            if y < x_lo {
                T::zero()
            } else {
                T::cst(y.exp()) - k * d
            }
        }
        OptionKind::Put => {
            if y < x_lo {
                k * d - T::cst(y.exp())
            } else {
                T::zero()
            }
        }
    }
}

/// March the scheme from the payoff (`n = 0`) to `τ = T` (`n = N`).
pub fn solve_layers<T: Real>(
    contract: &OptionContract,
    params: &ModelParams<T>,
    grid: &GridSpec,
    cfg: &PideConfig,
) -> Result<PideSolution<T>> {
    contract.validate()?;
    if (grid.maturity - contract.maturity).abs() > 1e-12 * contract.maturity {
        return Err(invalid("maturity", "grid and contract maturities differ"));
    }
    if let (OptionKind::DownAndOutCall, Some(b)) = (contract.kind, contract.barrier) {
        if (grid.x_min - b.ln()).abs() > 1e-12 {
            return Err(invalid("x_min", "barrier grids must start at ln(B)"));
        }
    }
    let sys = assemble_system(grid, params)?;
    let x = sys.x.clone();
    let n = x.len();
    let (x_lo, x_hi) = (x[0], x[n - 1]);
    let alpha = params.time_order();
    let d = discrete_discount(&sys.weights, params.rate, params.lambda, grid.dt(), alpha, grid.n_time);
    let pv = params.values();
    let jumps = (pv.lambda > 0.0).then(|| JumpOperator::new(&x, pv.mu_y, pv.sigma_y, cfg.hermite_nodes));

    let v0: Vec<T> = x.iter().map(|xi| T::cst(contract.payoff(xi.exp()))).collect();
    let mut history = History::new(cfg.history, sys.weights.clone());
    history.push(vec![T::zero(); n]);
    let mut layers = cfg.keep_layers.then(|| vec![v0.clone()]);
    let mut diag = SolveDiagnostics {
        n_space: n,
        n_time: grid.n_time,
        x_min: x_lo,
        x_max: x_hi,
        step_ratio: grid.step_ratio(pv.sigma0),
        ..Default::default()
    };
    diag.norms.push(weighted_norm(&x, &v0));

    let mut prev = v0.clone();
    let mut hist = vec![T::zero(); n];
    let mut jump = vec![T::zero(); n];
    let mut rhs = vec![T::zero(); n];
    for step in 1..=grid.n_time {
        history.sum(step, &mut hist);
        if let Some(op) = &jumps {
            let dp = d[step - 1];
            op.expectation(&prev, |y| outside_value(contract.kind, contract.strike, y, x_lo, dp), &mut jump);
        }
        sys.rhs(&v0, &hist, &jump, &mut rhs);
        let (lo, hi) = boundary_values(contract.kind, contract.strike, x_lo, x_hi, d[step]);
        rhs[0] = lo;
        rhs[n - 1] = hi;
        let mut next = prev.clone();
        let stats = bicgstab(&sys.matrix, &rhs, &mut next, &cfg.solver);
        if !stats.converged {
            return Err(Error::Solver {
                step,
                history: stats.history,
            });
        }
        diag.iterations.push(stats.iterations);
        diag.residuals.push(stats.residual);
        diag.norms.push(weighted_norm(&x, &next));
        history.push(next.iter().zip(&v0).map(|(a, b)| *a - *b).collect());
        if let Some(l) = layers.as_mut() {
            l.push(next.clone());
        }
        prev = next;
    }
    Ok(PideSolution {
        x,
        values: prev,
        layers,
        discount: d[grid.n_time],
        diagnostics: diag,
    })
}

/// Price a contract with the default solver settings.
pub fn solve_pide(contract: &OptionContract, params: &ModelParams, grid: &GridSpec) -> Result<PricingResult> {
    solve_pide_with(contract, params, grid, &PideConfig::default())
}

pub fn solve_pide_with(
    contract: &OptionContract,
    params: &ModelParams,
    grid: &GridSpec,
    cfg: &PideConfig,
) -> Result<PricingResult> {
    if let (OptionKind::DownAndOutCall, Some(b)) = (contract.kind, contract.barrier) {
        if contract.spot <= b {
            contract.validate()?;
            return Ok(PricingResult {
                price: 0.0,
                std_err: None,
                method: Method::Pide,
                diagnostics: Diagnostics::Pide(SolveDiagnostics::default()),
            });
        }
    }
    let sol = solve_layers(contract, params, grid, cfg)?;
    Ok(PricingResult {
        price: sol.value_at(contract.spot),
        std_err: None,
        method: Method::Pide,
        diagnostics: Diagnostics::Pide(sol.diagnostics),
    })
}

/// Default grid for a contract: uniform for Europeans, clustered at the
/// barrier otherwise.
pub fn default_grid(contract: &OptionContract, params: &ModelParams, n_space: usize, n_time: usize) -> Result<GridSpec> {
    match contract.kind {
        OptionKind::DownAndOutCall => GridSpec::barrier(contract, params, n_space, n_time, 0.97),
        _ => GridSpec::european(contract, params, n_space, n_time),
    }
}

/// One level of a refinement study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Refinement {
    pub dt: f64,
    pub dx: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub dx: f64,
    pub error: f64,
    /// Weighted-norm growth of this level's solve.
    pub stability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Spots at which the max-norm error is measured: ±10% around `S₀`.
pub fn error_window(spot: f64) -> Vec<f64> {
    (-4..=4).map(|j| spot * (1.0 + 0.025 * j as f64)).collect()
}

/// Max-norm error against `reference` over [`error_window`] for each
/// refinement, and the log-log slope in `dt`. Levels are solved in parallel.
pub fn convergence_study<R>(
    contract: &OptionContract,
    params: &ModelParams,
    refinements: &[Refinement],
    reference: R,
) -> Result<ConvergenceReport>
where
    R: Fn(f64) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    if refinements.len() < 4 {
        return Err(invalid("refinements", "need at least 4 levels"));
    }
    let window = error_window(contract.spot);
    let exact: Vec<f64> = window.iter().map(|s| reference(*s)).collect::<Result<_>>()?;
    let base = default_grid(contract, params, 5, 1)?;
    let rows: Vec<ConvergenceRow> = refinements
        .par_iter()
        .map(|r| {
            let n_time = (contract.maturity / r.dt).round().max(1.0) as usize;
            let n_space = ((base.x_max - base.x_min) / r.dx).round() as usize + 1;
            let grid = match contract.kind {
                OptionKind::DownAndOutCall => GridSpec::uniform(base.x_min, base.x_max, n_space, n_time, contract.maturity)?,
                // strike on a node keeps the payoff kink from moving between levels
                _ => GridSpec::uniform_centred(
                    base.x_min,
                    base.x_max,
                    contract.strike.ln() + 0.5 * (base.x_max - base.x_min) / (n_space - 1) as f64,
                    n_space,
                    n_time,
                    contract.maturity,
                )?,
            };
            let sol = solve_layers(contract, params, &grid, &PideConfig::default())?;
            let error = window
                .iter()
                .zip(&exact)
                .map(|(s, e)| (sol.value_at(*s) - e).abs())
                .fold(0.0, f64::max);
            Ok(ConvergenceRow {
                dt: grid.dt(),
                dx: (grid.x_max - grid.x_min) / (grid.n_space - 1) as f64,
                error,
                stability: sol.diagnostics.stability_constant(),
            })
        })
        .collect::<Result<_>>()?;
    let slope = loglog_slope(
        &rows.iter().map(|r| r.dt).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.error).collect::<Vec<_>>(),
    );
    Ok(ConvergenceReport { rows, slope })
}

impl ConvergenceReport {
    /// Convergence table `dt,dx,error`.
    pub fn write_csv<W: Write>(&self, out: W, prov: Option<&Provenance>) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.dt), fmt_f64(r.dx), fmt_f64(r.error)])
            .collect();
        write_table(out, prov, &["dt", "dx", "error"], &rows)
    }
}

impl PideSolution<f64> {
    /// Layer dump `n,i,x,S,V`; `n = 0` is the payoff. Needs `keep_layers`.
    pub fn write_layers<W: Write>(&self, out: W, prov: Option<&Provenance>) -> Result<()> {
        let layers = self
            .layers
            .as_ref()
            .ok_or_else(|| invalid("keep_layers", "layers were not retained"))?;
        let mut rows = Vec::with_capacity(layers.len() * self.x.len());
        for (n, layer) in layers.iter().enumerate() {
            for (i, (x, v)) in self.x.iter().zip(layer).enumerate() {
                rows.push(vec![n.to_string(), i.to_string(), fmt_f64(*x), fmt_f64(x.exp()), fmt_f64(*v)]);
            }
        }
        write_table(out, prov, &["n", "i", "x", "S", "V"], &rows)
    }
}

/// Refinement ladder with `dx = dt^{1/2}`, halving `dt` from `dt0`.
pub fn sqrt_ladder(dt0: f64, levels: usize) -> Vec<Refinement> {
    (0..levels)
        .map(|l| {
            let dt = dt0 / 2f64.powi(l as i32);
            Refinement { dt, dx: dt.sqrt() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::bs_call;
    use crate::linalg::LinearOperator;
    use crate::measure::jump_kappa;

    #[test]
    fn clustered_nodes_grow_geometrically() {
        let c = OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5);
        let g = GridSpec::barrier(&c, &ModelParams::reference(0.02), 400, 10, 0.97).unwrap();
        let x = g.nodes();
        assert_eq!(x.len(), 400);
        assert_eq!(x[0], 3800f64.ln());
        for i in 1..g.cluster_cells {
            let r = (x[i + 1] - x[i]) / (x[i] - x[i - 1]);
            assert!((r - 1.0 / 0.97).abs() < 1e-9);
        }
        assert!((x[399] - g.x_max).abs() < 1e-12);
    }

    #[test]
    fn stencil_action_matches_direct_loop() {
        let p = ModelParams::reference(0.02);
        let c = OptionContract::down_and_out_call(4050.0, 4200.0, 3800.0, 0.5);
        let g = GridSpec::barrier(&c, &p, 60, 10, 0.97).unwrap();
        let sys = assemble_system(&g, &p).unwrap();
        let x = &sys.x;
        let f: Vec<f64> = x.iter().map(|v| (0.3 * v).sin() + v * v).collect();
        let mut y = vec![0.0; x.len()];
        sys.matrix.apply(&f, &mut y);
        let dt = g.dt();
        let s = dt.powf(-0.35);
        let k = p.kappa();
        for i in 1..x.len() - 1 {
            let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
            let fx = (f[i + 1] * hm * hm - f[i - 1] * hp * hp + f[i] * (hp * hp - hm * hm)) / (hm * hp * (hm + hp));
            let fxx = 2.0 * (f[i + 1] * hm + f[i - 1] * hp - f[i] * (hm + hp)) / (hm * hp * (hm + hp));
            let lv = 0.5 * 0.0196 * (fxx - fx) + (0.02 - 0.85 * k) * fx - (0.02 + 0.85) * f[i];
            let expect = s * f[i] - lv - 0.014 * s * fx;
            assert!((y[i] - expect).abs() < 1e-12 * expect.abs().max(1.0), "{i}: {} vs {expect}", y[i]);
        }
    }

    #[test]
    fn jump_quadrature_examples() {
        let x: Vec<f64> = (0..801).map(|i| -4.0 + 0.01 * i as f64).collect();
        let p = ModelParams::merton(0.2, 0.02, 0.85, -0.04, 0.11);
        let c = vec![3.5; x.len()];
        assert!(jump_quadrature(&x, &c, &p, 16, |_| 3.5).iter().all(|v| v.abs() < 1e-13));
        let e: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let j = jump_quadrature(&x, &e, &p, 16, f64::exp);
        let k = jump_kappa(-0.04, 0.11);
        for i in 100..700 {
            // linear interpolation error is O(dx²) relative
            assert!((j[i] - 0.85 * k * e[i]).abs() < 2e-5 * e[i], "{}", j[i] / e[i]);
        }
        let zero = ModelParams::black_scholes(0.2, 0.02);
        assert!(jump_quadrature(&x, &e, &zero, 16, f64::exp).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn black_scholes_limit_within_tolerance() {
        let c = OptionContract::call(100.0, 100.0, 1.0);
        let p = ModelParams::black_scholes(0.2, 0.05);
        let g = GridSpec::european(&c, &p, 400, 400).unwrap();
        let r = solve_pide(&c, &p, &g).unwrap();
        assert!((r.price - bs_call(100.0, 100.0, 1.0, 0.05, 0.2)).abs() < 0.05, "{}", r.price);
    }

    #[test]
    fn fft_history_matches_direct() {
        let c = OptionContract::call(100.0, 105.0, 0.5);
        let p = ModelParams::reference(0.02);
        let g = GridSpec::european(&c, &p, 80, 150).unwrap();
        let a = solve_layers(&c, &p, &g, &PideConfig::default()).unwrap();
        let cfg = PideConfig {
            history: HistoryMode::Fft { block: 16 },
            ..Default::default()
        };
        let b = solve_layers(&c, &p, &g, &cfg).unwrap();
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).abs() <= 1e-12 * scale, "{u} {v}");
        }
    }

    #[test]
    fn discrete_discount_classical_is_backward_euler() {
        let w = weight_recurrence(1.0, 11);
        let d = discrete_discount(&w, 0.05, 0.0, 0.1, 1.0, 10);
        assert!((d[10] - (1.0f64 + 0.005).powi(-10)).abs() < 1e-14);
    }
}
