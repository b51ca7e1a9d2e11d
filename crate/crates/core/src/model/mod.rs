//! Markov chains on a time grid together with their Malliavin weights.
//!
//! A model produces, for a start index `i`, one row made of the states
//! `X_i, …, X_N` and the weights `H^{(i)}_{i+1}, …, H^{(i)}_N`. Each weight has
//! zero conditional mean given `X_i` and conditional second moment at most
//! `C_M² / (t_j - t_i)`.

mod cloud;
mod euler;

pub use cloud::{sample_cloud, InitialLaw, SimulationCloud};
pub use euler::{EulerSde, MultiplicativeNoise, OrnsteinUhlenbeck, SdeCoefficients};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

pub trait MarkovModel: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// Weight dimension `q`.
    fn weight_dim(&self) -> usize;

    /// Moment constant `C_M` of the weights.
    fn moment_constant(&self) -> f64;

    /// One transition `X_k -> X_{k+1}` driven by the Brownian increment `dw`.
    fn transition(&self, grid: &TimeGrid, k: usize, x: &[f64], dw: &[f64], out: &mut [f64]);

    /// Simulates a row started from `x0` at time 0 and observed from index
    /// `start` on. `x` receives `(N - start + 1) * d` values and `h` receives
    /// `(N - start) * q` values. `path` is only used in error messages.
    fn sample_row(
        &self,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        path: usize,
        rng: &mut ChaCha8Rng,
        x: &mut [f64],
        h: &mut [f64],
    ) -> Result<()>;
}

fn normals(rng: &mut ChaCha8Rng, scale: f64, out: &mut [f64]) {
    for v in out {
        let g: f64 = StandardNormal.sample(rng);
        *v = scale * g;
    }
}

/// Row sampler shared by models whose weights are `(W_j - W_i)/(t_j - t_i)`.
fn brownian_weight_row<M: MarkovModel + ExactSpan>(
    model: &M,
    grid: &TimeGrid,
    start: usize,
    x0: &[f64],
    rng: &mut ChaCha8Rng,
    x: &mut [f64],
    h: &mut [f64],
) {
    let d = model.dim();
    let n = grid.len();
    let mut cur = x0.to_vec();
    let mut next = vec![0.0; d];
    let mut dw = vec![0.0; d];
    // The transitions are exact, so X_start is reached in one step.
    if start > 0 {
        normals(rng, grid.t(start).sqrt(), &mut dw);
        model.transition_span(grid, start, &cur, &dw, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    x[..d].copy_from_slice(&cur);
    let mut w = vec![0.0; d];
    let ti = grid.t(start);
    for k in start..n {
        normals(rng, grid.step(k).sqrt(), &mut dw);
        model.transition(grid, k, &cur, &dw, &mut next);
        std::mem::swap(&mut cur, &mut next);
        let r = k - start;
        x[(r + 1) * d..(r + 2) * d].copy_from_slice(&cur);
        let span = grid.t(k + 1) - ti;
        for c in 0..d {
            w[c] += dw[c];
            h[r * d + c] = w[c] / span;
        }
    }
}

/// Models whose transition over `[0, t_k]` can be sampled in one shot.
trait ExactSpan {
    fn transition_span(&self, grid: &TimeGrid, k: usize, x0: &[f64], w: &[f64], out: &mut [f64]);
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::param("d", "dimension must be at least 1"));
    }
    Ok(())
}

/// `X_t = X_0 + μ t + W_t` with weights `(W_{t_j} - W_{t_i})/(t_j - t_i)` and
/// `C_M = √d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianModel {
    drift: Vec<f64>,
}

impl BrownianModel {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            drift: vec![0.0; d],
        })
    }

    pub fn with_drift(drift: Vec<f64>) -> Result<Self> {
        check_dim(drift.len())?;
        if drift.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("drift", "must be finite"));
        }
        Ok(Self { drift })
    }
}

impl ExactSpan for BrownianModel {
    fn transition_span(&self, grid: &TimeGrid, k: usize, x0: &[f64], w: &[f64], out: &mut [f64]) {
        let t = grid.t(k);
        for c in 0..out.len() {
            out[c] = x0[c] + self.drift[c] * t + w[c];
        }
    }
}

impl MarkovModel for BrownianModel {
    fn dim(&self) -> usize {
        self.drift.len()
    }

    fn weight_dim(&self) -> usize {
        self.drift.len()
    }

    fn moment_constant(&self) -> f64 {
        (self.drift.len() as f64).sqrt()
    }

    fn transition(&self, grid: &TimeGrid, k: usize, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let dt = grid.step(k);
        for c in 0..out.len() {
            out[c] = x[c] + self.drift[c] * dt + dw[c];
        }
    }

    fn sample_row(
        &self,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        _path: usize,
        rng: &mut ChaCha8Rng,
        x: &mut [f64],
        h: &mut [f64],
    ) -> Result<()> {
        brownian_weight_row(self, grid, start, x0, rng, x, h);
        Ok(())
    }
}

/// Componentwise geometric Brownian motion
/// `X_t = X_0 exp((μ - σ²/2) t + σ W_t)`, with the same weights as
/// [`BrownianModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct GbmModel {
    mu: Vec<f64>,
    sigma: Vec<f64>,
}

impl GbmModel {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        check_dim(mu.len())?;
        if mu.len() != sigma.len() {
            return Err(Error::param("sigma", "must have the same length as mu"));
        }
        if sigma.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::param("sigma", "volatilities must be positive"));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::param("mu", "must be finite"));
        }
        Ok(Self { mu, sigma })
    }

    fn log_step(&self, c: usize, dt: f64, w: f64) -> f64 {
        ((self.mu[c] - 0.5 * self.sigma[c] * self.sigma[c]) * dt + self.sigma[c] * w).exp()
    }
}

impl ExactSpan for GbmModel {
    fn transition_span(&self, grid: &TimeGrid, k: usize, x0: &[f64], w: &[f64], out: &mut [f64]) {
        let t = grid.t(k);
        for c in 0..out.len() {
            out[c] = x0[c] * self.log_step(c, t, w[c]);
        }
    }
}

impl MarkovModel for GbmModel {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn weight_dim(&self) -> usize {
        self.mu.len()
    }

    fn moment_constant(&self) -> f64 {
        (self.mu.len() as f64).sqrt()
    }

    fn transition(&self, grid: &TimeGrid, k: usize, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let dt = grid.step(k);
        for c in 0..out.len() {
            out[c] = x[c] * self.log_step(c, dt, dw[c]);
        }
    }

    fn sample_row(
        &self,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        _path: usize,
        rng: &mut ChaCha8Rng,
        x: &mut [f64],
        h: &mut [f64],
    ) -> Result<()> {
        brownian_weight_row(self, grid, start, x0, rng, x, h);
        Ok(())
    }
}
