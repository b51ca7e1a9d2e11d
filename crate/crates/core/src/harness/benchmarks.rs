//! Benchmark problems on a one-dimensional Brownian motion, each with an
//! exact solution of the discrete backward equation.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::constants::TerminalSmoothness;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::BrownianModel;
use crate::quadrature::{gauss_hermite, integrate};
use crate::rng::{Domain, StreamFactory};
use crate::solver::{Driver, LinearDriver, Problem, Terminal, ZeroDriver};

/// Exact discrete solution `(y_i, z_i)` for `i < N`.
pub trait Oracle: Send + Sync {
    fn y(&self, i: usize, x: &[f64]) -> f64;
    fn z(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// `y_i(x)`, with `z_i(x)` written to `z`. Override when both come from
    /// one computation.
    fn values(&self, i: usize, x: &[f64], z: &mut [f64]) -> f64 {
        self.z(i, x, z);
        self.y(i, x)
    }
}

/// `Φ(x) = x` clamped to `[-limit, limit]`. The clamp keeps the terminal
/// value bounded; with the default limit it is never reached in practice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClampedIdentity {
    pub limit: f64,
}

impl Terminal for ClampedIdentity {
    fn value(&self, x: &[f64]) -> f64 {
        x[0].clamp(-self.limit, self.limit)
    }

    fn bound(&self) -> f64 {
        self.limit
    }

    fn smoothness(&self) -> Option<TerminalSmoothness> {
        // 1-Lipschitz of a Brownian motion: the conditional variance is at
        // most T - t_i.
        Some(TerminalSmoothness {
            c_phi: 1.0,
            theta_phi: 1.0,
        })
    }
}

/// `Φ(x) = tanh(x)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TanhTerminal;

impl Terminal for TanhTerminal {
    fn value(&self, x: &[f64]) -> f64 {
        x[0].tanh()
    }

    fn bound(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> Option<TerminalSmoothness> {
        Some(TerminalSmoothness {
            c_phi: 1.0,
            theta_phi: 1.0,
        })
    }
}

/// `Φ(x) = min(|x|^θ, cap)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderTerminal {
    pub theta: f64,
    pub cap: f64,
}

impl HolderTerminal {
    fn kinks(&self) -> Vec<f64> {
        let c = self.cap.powf(1.0 / self.theta);
        vec![-c, 0.0, c]
    }
}

impl Terminal for HolderTerminal {
    fn value(&self, x: &[f64]) -> f64 {
        x[0].abs().powf(self.theta).min(self.cap)
    }

    fn bound(&self) -> f64 {
        self.cap
    }

    fn smoothness(&self) -> Option<TerminalSmoothness> {
        // θ-Hölder with constant 1: E|W_τ|^{2θ} <= τ^θ by Jensen.
        Some(TerminalSmoothness {
            c_phi: 1.0,
            theta_phi: self.theta,
        })
    }
}

/// Identifiers of the registered benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkId {
    /// Zero driver, `Φ(x) = x`.
    B1,
    /// Zero driver, `Φ = tanh`.
    B2,
    /// Linear driver `f = α y`, `Φ(x) = x`.
    B3,
    /// Zero driver, `Φ(x) = |x|^θ ∧ C`.
    B4,
}

impl BenchmarkId {
    pub const ALL: [BenchmarkId; 4] = [Self::B1, Self::B2, Self::B3, Self::B4];

    pub fn name(self) -> &'static str {
        match self {
            Self::B1 => "b1",
            Self::B2 => "b2",
            Self::B3 => "b3",
            Self::B4 => "b4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::B1 => "zero driver, Brownian motion, terminal x; exact y = x, z = 1",
            Self::B2 => "zero driver, Brownian motion, terminal tanh(x); heat-kernel quadrature",
            Self::B3 => "driver a*y, Brownian motion, terminal x; backward products",
            Self::B4 => "zero driver, Brownian motion, terminal min(|x|^theta, cap); quadrature",
        }
    }
}

impl fmt::Display for BenchmarkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config {
                key: "problem.id".into(),
                reason: format!("unknown benchmark `{s}` (expected b1, b2, b3 or b4)"),
            })
    }
}

/// The benchmark registry: every id with a one-line description.
pub fn register_benchmarks() -> Vec<(BenchmarkId, &'static str)> {
    BenchmarkId::ALL.iter().map(|&b| (b, b.description())).collect()
}

/// Tunable data of the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkParams {
    /// Clamp level of the identity terminal (B1, B3).
    pub clamp: f64,
    /// Driver slope (B3).
    pub alpha: f64,
    /// Hölder exponent (B4).
    pub theta_phi: f64,
    /// Cap of the Hölder terminal (B4).
    pub cap: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            clamp: 12.0,
            alpha: 0.5,
            theta_phi: 0.5,
            cap: 2.0,
        }
    }
}

/// A problem together with its exact solution.
#[derive(Clone)]
pub struct Benchmark {
    pub id: BenchmarkId,
    pub problem: Problem,
    pub oracle: Arc<dyn Oracle>,
}

pub fn benchmark(id: BenchmarkId, grid: TimeGrid, params: &BenchmarkParams) -> Result<Benchmark> {
    let model = Arc::new(BrownianModel::new(1)?);
    let identity = ClampedIdentity {
        limit: params.clamp,
    };
    if !(params.clamp > 0.0 && params.clamp.is_finite()) {
        return Err(Error::param("clamp", "must be positive and finite"));
    }
    let (driver, terminal, oracle): (Arc<dyn Driver>, Arc<dyn Terminal>, Arc<dyn Oracle>) = match id {
        BenchmarkId::B1 => (
            Arc::new(ZeroDriver),
            Arc::new(identity),
            Arc::new(LinearOracle::new(grid.clone(), params.clamp, 0.0)),
        ),
        BenchmarkId::B2 => (
            Arc::new(ZeroDriver),
            Arc::new(TanhTerminal),
            Arc::new(HeatKernelOracle::new(grid.clone(), Arc::new(TanhTerminal), Vec::new())),
        ),
        BenchmarkId::B3 => {
            if !params.alpha.is_finite() {
                return Err(Error::param("alpha", "must be finite"));
            }
            (
                Arc::new(LinearDriver(params.alpha)),
                Arc::new(identity),
                Arc::new(LinearOracle::new(grid.clone(), params.clamp, params.alpha)),
            )
        }
        BenchmarkId::B4 => {
            if !(params.theta_phi > 0.0 && params.theta_phi <= 1.0) {
                return Err(Error::param("theta_phi", "must lie in (0, 1]"));
            }
            if !(params.cap > 0.0 && params.cap.is_finite()) {
                return Err(Error::param("cap", "must be positive and finite"));
            }
            let t = HolderTerminal {
                theta: params.theta_phi,
                cap: params.cap,
            };
            (
                Arc::new(ZeroDriver),
                Arc::new(t),
                Arc::new(HeatKernelOracle::new(grid.clone(), Arc::new(t), t.kinks())),
            )
        }
    };
    Ok(Benchmark {
        id,
        problem: Problem {
            grid,
            model,
            driver,
            terminal,
        },
        oracle,
    })
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// `E[clamp(x + s G)]` and its derivative in `x`, for `G` standard normal.
fn clamped_gaussian(x: f64, s: f64, limit: f64) -> (f64, f64) {
    let n = std_normal();
    let a = (limit - x) / s;
    let b = (limit + x) / s;
    // E[(x + sG - L)^+] and E[(-L - x - sG)^+].
    let over = s * n.pdf(a) - (limit - x) * n.sf(a);
    let under = s * n.pdf(b) - (limit + x) * n.sf(b);
    let mean = x - over + under;
    let slope = n.cdf(a) - n.sf(b);
    (mean, slope)
}

/// Exact solution with terminal `clamp(x)` and driver `α y`:
/// `y_i = c_i g_i`, `z_i = c_{i+1} g_i'` where `g_i(x) = E[clamp(X_N) | X_i = x]`
/// and `c_i = Π_{j>=i} (1 + α Δ_j)`.
#[derive(Debug, Clone)]
pub struct LinearOracle {
    grid: TimeGrid,
    limit: f64,
    factors: Vec<f64>,
}

impl LinearOracle {
    pub fn new(grid: TimeGrid, limit: f64, alpha: f64) -> Self {
        let factors = linear_factors(&grid, alpha);
        Self {
            grid,
            limit,
            factors,
        }
    }

    pub fn factors(&self) -> &[f64] {
        &self.factors
    }
}

/// `c_i = Π_{j=i}^{N-1} (1 + α Δ_j)` for `i = 0..=N`.
pub fn linear_factors(grid: &TimeGrid, alpha: f64) -> Vec<f64> {
    let n = grid.len();
    let mut c = vec![1.0; n + 1];
    for i in (0..n).rev() {
        c[i] = c[i + 1] * (1.0 + alpha * grid.step(i));
    }
    c
}

impl Oracle for LinearOracle {
    fn y(&self, i: usize, x: &[f64]) -> f64 {
        let s = self.grid.time_to_horizon(i).sqrt();
        if s == 0.0 {
            return x[0].clamp(-self.limit, self.limit);
        }
        self.factors[i] * clamped_gaussian(x[0], s, self.limit).0
    }

    fn z(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let s = self.grid.time_to_horizon(i).sqrt();
        out[0] = self.factors[i + 1] * clamped_gaussian(x[0], s, self.limit).1;
    }
}

/// Zero-driver solution by quadrature against the Gaussian kernel:
/// `y_i(x) = E Φ(x + s G)` and `z_i(x) = E[Φ(x + s G) G] / s`, with
/// `s² = T - t_i`.
pub struct HeatKernelOracle {
    grid: TimeGrid,
    terminal: Arc<dyn Terminal>,
    /// Points where `Φ` is not smooth; the integral is split there.
    kinks: Vec<f64>,
    /// Gauss–Hermite rule used instead of adaptive quadrature when `Φ` is
    /// smooth everywhere.
    rule: Option<Arc<(Vec<f64>, Vec<f64>)>>,
}

/// Nodes of the Gauss–Hermite rule for smooth terminals.
const HERMITE_NODES: usize = 128;

impl HeatKernelOracle {
    pub fn new(grid: TimeGrid, terminal: Arc<dyn Terminal>, kinks: Vec<f64>) -> Self {
        let rule = kinks.is_empty().then(|| Arc::new(gauss_hermite(HERMITE_NODES)));
        Self {
            grid,
            terminal,
            kinks,
            rule,
        }
    }

    fn moments(&self, i: usize, x: f64) -> (f64, f64) {
        let s = self.grid.time_to_horizon(i).sqrt();
        match &self.rule {
            Some(rule) => {
                let (nodes, weights) = rule.as_ref();
                let (mut m0, mut m1) = (0.0, 0.0);
                for (u, w) in nodes.iter().zip(weights) {
                    let v = w * self.terminal.value(&[x + s * u]);
                    m0 += v;
                    m1 += v * u;
                }
                (m0, m1 / s)
            }
            None => self.adaptive_moments(s, x),
        }
    }

    fn adaptive_moments(&self, s: f64, x: f64) -> (f64, f64) {
        const SPAN: f64 = 12.0;
        let mut cuts = vec![-SPAN];
        let mut inner: Vec<f64> = self
            .kinks
            .iter()
            .map(|k| (k - x) / s)
            .filter(|u| u.abs() < SPAN)
            .collect();
        inner.sort_by(f64::total_cmp);
        cuts.extend(inner);
        cuts.push(SPAN);
        let n = std_normal();
        let phi = |u: f64| self.terminal.value(&[x + s * u]);
        let (mut m0, mut m1) = (0.0, 0.0);
        for w in cuts.windows(2) {
            m0 += integrate(|u| phi(u) * n.pdf(u), w[0], w[1], 1e-12, 1e-10).value;
            m1 += integrate(|u| phi(u) * u * n.pdf(u), w[0], w[1], 1e-12, 1e-10).value;
        }
        (m0, m1 / s)
    }
}

impl Oracle for HeatKernelOracle {
    fn y(&self, i: usize, x: &[f64]) -> f64 {
        if i == self.grid.len() {
            return self.terminal.value(x);
        }
        self.moments(i, x[0]).0
    }

    fn z(&self, i: usize, x: &[f64], out: &mut [f64]) {
        out[0] = self.moments(i, x[0]).1;
    }

    fn values(&self, i: usize, x: &[f64], z: &mut [f64]) -> f64 {
        let (y, dz) = self.moments(i, x[0]);
        z[0] = dz;
        y
    }
}

/// Brute-force nested Monte Carlo for `y_i(x)` under the driver `α y` on a
/// one-dimensional Brownian motion. Every `y_{k+1}(X_{k+1})` inside the sum is
/// replaced by an independent inner estimate with `inner` paths, recursively.
/// Returns the estimate and its standard error over the `outer` samples.
pub fn nested_linear_y(
    grid: &TimeGrid,
    terminal: &dyn Terminal,
    alpha: f64,
    i: usize,
    x: f64,
    outer: usize,
    inner: usize,
    seed: u64,
) -> (f64, f64) {
    use rayon::prelude::*;
    let streams = StreamFactory::new(seed);
    let n = grid.len();

    fn estimate(
        grid: &TimeGrid,
        terminal: &dyn Terminal,
        alpha: f64,
        k: usize,
        x: f64,
        samples: usize,
        inner: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> f64 {
        let n = grid.len();
        if k == n {
            return terminal.value(&[x]);
        }
        let mut acc = 0.0;
        for _ in 0..samples {
            acc += one_sample(grid, terminal, alpha, k, x, inner, rng);
        }
        acc / samples as f64
    }

    fn one_sample(
        grid: &TimeGrid,
        terminal: &dyn Terminal,
        alpha: f64,
        k: usize,
        x: f64,
        inner: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> f64 {
        let n = grid.len();
        let mut cur = x;
        let mut sum = 0.0;
        for j in k..n {
            let g: f64 = StandardNormal.sample(rng);
            cur += grid.step(j).sqrt() * g;
            let y_next = if j + 1 == n {
                terminal.value(&[cur])
            } else {
                estimate(grid, terminal, alpha, j + 1, cur, inner, inner, rng)
            };
            sum += alpha * y_next * grid.step(j);
        }
        terminal.value(&[cur]) + sum
    }

    let values: Vec<f64> = (0..outer)
        .into_par_iter()
        .map(|row| {
            let mut rng = streams.stream(Domain::Auxiliary, i.min(n), row);
            one_sample(grid, terminal, alpha, i, x, inner, &mut rng)
        })
        .collect();
    let m = outer as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Plain Monte Carlo of `E Φ(x + s G)` with its standard error.
pub fn monte_carlo_heat(terminal: &dyn Terminal, x: f64, s: f64, samples: usize, seed: u64) -> (f64, f64) {
    let streams = StreamFactory::new(seed);
    let mut rng = streams.stream(Domain::Auxiliary, 0, 0);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..samples {
        let g: f64 = StandardNormal.sample(&mut rng);
        let v = terminal.value(&[x + s * g]);
        sum += v;
        sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sq / m - mean * mean) * m / (m - 1.0);
    (mean, (var / m).sqrt())
}
