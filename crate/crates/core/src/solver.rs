//! The backward regression scheme.
//!
//! For `i = N-1, …, 0` a fresh cloud is drawn; the `Z` response
//!
//! ```text
//! Φ(x_N) h_N + Σ_{k=i+1}^{N-1} f_k(x_k, y_{k+1}(x_{k+1}), z_k(x_k)) h_k Δ_k
//! ```
//!
//! is regressed first and truncated at `C_z[i]`; then the `Y` response
//!
//! ```text
//! Φ(x_N) + Σ_{k=i}^{N-1} f_k(x_k, y_{k+1}(x_{k+1}), z_k(x_k)) Δ_k
//! ```
//!
//! which reads the freshly fitted `z_i` in its first term, is regressed and
//! truncated at `C_y[i]`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::constants::{BoundsTable, ProblemConstants, TerminalSmoothness};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::{sample_cloud, InitialLaw, MarkovModel, SimulationCloud};
use crate::regression::{ols_fit, LocalPolynomialBasis, LocalPolynomialEstimator};
use crate::rng::{Domain, StreamFactory};

/// Regularity constants of a driver: `|f_k(x,y,z) - f_k(x,y',z')| <=
/// L_f (|y-y'| + |z-z'|) / (T-t_k)^{(1-θ_L)/2}` and
/// `|f_k(x,0,0)| <= C_f / (T-t_k)^{1-θ_C}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverConstants {
    pub l_f: f64,
    pub c_f: f64,
    pub theta_l: f64,
    pub theta_c: f64,
}

pub trait Driver: Send + Sync {
    /// `f_k(x, y, z)`.
    fn value(&self, grid: &TimeGrid, k: usize, x: &[f64], y: f64, z: &[f64]) -> f64;
    fn constants(&self) -> DriverConstants;
}

/// `f ≡ 0`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ZeroDriver;

impl Driver for ZeroDriver {
    fn value(&self, _: &TimeGrid, _: usize, _: &[f64], _: f64, _: &[f64]) -> f64 {
        0.0
    }

    fn constants(&self) -> DriverConstants {
        DriverConstants {
            l_f: 0.0,
            c_f: 0.0,
            theta_l: 1.0,
            theta_c: 1.0,
        }
    }
}

/// `f ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDriver(pub f64);

impl Driver for ConstantDriver {
    fn value(&self, _: &TimeGrid, _: usize, _: &[f64], _: f64, _: &[f64]) -> f64 {
        self.0
    }

    fn constants(&self) -> DriverConstants {
        DriverConstants {
            l_f: 0.0,
            c_f: self.0.abs(),
            theta_l: 1.0,
            theta_c: 1.0,
        }
    }
}

/// `f(y) = α y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearDriver(pub f64);

impl Driver for LinearDriver {
    fn value(&self, _: &TimeGrid, _: usize, _: &[f64], y: f64, _: &[f64]) -> f64 {
        self.0 * y
    }

    fn constants(&self) -> DriverConstants {
        DriverConstants {
            l_f: self.0.abs(),
            c_f: 0.0,
            theta_l: 1.0,
            theta_c: 1.0,
        }
    }
}

/// Terminal function `Φ` with its sup bound `C_ξ` and optional fractional
/// smoothness.
pub trait Terminal: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn bound(&self) -> f64;
    fn smoothness(&self) -> Option<TerminalSmoothness> {
        None
    }
}

/// A terminal function given by a closure.
pub struct FnTerminal<F> {
    pub f: F,
    pub bound: f64,
    pub smoothness: Option<TerminalSmoothness>,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Terminal for FnTerminal<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn bound(&self) -> f64 {
        self.bound
    }

    fn smoothness(&self) -> Option<TerminalSmoothness> {
        self.smoothness
    }
}

/// Model, driver and terminal condition on a fixed grid.
#[derive(Clone)]
pub struct Problem {
    pub grid: TimeGrid,
    pub model: Arc<dyn MarkovModel>,
    pub driver: Arc<dyn Driver>,
    pub terminal: Arc<dyn Terminal>,
}

impl Problem {
    /// Constants for the truncation levels and the error bounds.
    pub fn constants(&self) -> Result<ProblemConstants> {
        let dc = self.driver.constants();
        ProblemConstants::for_grid(
            &self.grid,
            dc.l_f,
            dc.c_f,
            dc.theta_l,
            dc.theta_c,
            self.model.moment_constant(),
            self.terminal.bound(),
            self.terminal.smoothness(),
            self.model.weight_dim(),
        )
    }
}

/// Per-index regression spaces, cloud sizes and random seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub basis_y: Vec<LocalPolynomialBasis>,
    pub basis_z: Vec<LocalPolynomialBasis>,
    pub cloud_sizes: Vec<usize>,
    pub initial: InitialLaw,
    pub seed: u64,
}

impl SolverConfig {
    /// The same bases and cloud size at every index.
    pub fn uniform(
        n: usize,
        basis_y: LocalPolynomialBasis,
        basis_z: LocalPolynomialBasis,
        m: usize,
        initial: InitialLaw,
        seed: u64,
    ) -> Self {
        Self {
            basis_y: vec![basis_y; n],
            basis_z: vec![basis_z; n],
            cloud_sizes: vec![m; n],
            initial,
            seed,
        }
    }

    /// Bases actually used at index `i`. With a deterministic `X_0` the
    /// regression at index 0 sees a single point, so it reduces to a plain
    /// average on one constant cell.
    pub fn effective_bases(&self, i: usize) -> Result<(LocalPolynomialBasis, LocalPolynomialBasis)> {
        match &self.initial {
            InitialLaw::Point(p) if i == 0 => {
                let r = p.iter().fold(0.0_f64, |a, v| a.max(v.abs())) + 1.0;
                let b = LocalPolynomialBasis::constant(r, p.len())?;
                Ok((b.clone(), b))
            }
            _ => Ok((self.basis_y[i].clone(), self.basis_z[i].clone())),
        }
    }

    fn validate(&self, problem: &Problem) -> Result<()> {
        let n = problem.grid.len();
        for (name, len) in [
            ("basis_y", self.basis_y.len()),
            ("basis_z", self.basis_z.len()),
            ("cloud_sizes", self.cloud_sizes.len()),
        ] {
            if len != n {
                return Err(Error::param(name, format!("need {n} entries, got {len}")));
            }
        }
        let d = problem.model.dim();
        if self.initial.dim() != d {
            return Err(Error::param("x0", format!("need dimension {d}")));
        }
        self.initial.validate()?;
        for i in 0..n {
            let (by, bz) = self.effective_bases(i)?;
            if by.dim() != d || bz.dim() != d {
                return Err(Error::param("basis", format!("index {i}: basis dimension differs from {d}")));
            }
            let need = by.dimension().max(bz.dimension());
            if self.cloud_sizes[i] < need {
                return Err(Error::InsufficientSamples {
                    index: i,
                    samples: self.cloud_sizes[i],
                    dimension: need,
                });
            }
        }
        Ok(())
    }
}

/// Which regression of an index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Y,
    Z,
}

/// Per-index record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexDiagnostics {
    pub index: usize,
    pub cloud_size: usize,
    pub k_y: usize,
    pub k_z: usize,
    /// `max_m |S_Y|` over the cloud.
    pub max_abs_y_response: f64,
    /// `(1/M) Σ_m |S_Z|²` over the cloud.
    pub mean_sq_z_response: f64,
    /// The cloud states `X_i`, kept for in-sample error norms.
    pub states: Vec<f64>,
}

/// Output of [`mwls_solve`].
#[derive(Clone)]
pub struct MwlsSolution {
    pub problem: Problem,
    pub config: SolverConfig,
    pub bounds: BoundsTable,
    /// `y_i` for `i = 0..N`.
    pub y: Vec<LocalPolynomialEstimator>,
    /// `z_i` for `i = 0..N`.
    pub z: Vec<LocalPolynomialEstimator>,
    pub diagnostics: Vec<IndexDiagnostics>,
    /// Order in which the regressions ran.
    pub fit_order: Vec<(usize, Component)>,
}

impl MwlsSolution {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// `y_k(x)` for `k <= N`, with `y_N = Φ`.
    pub fn y_value(&self, k: usize, x: &[f64]) -> f64 {
        if k == self.y.len() {
            self.problem.terminal.value(x)
        } else {
            self.y[k].value(x)
        }
    }

    /// Total number of simulated transitions, `Σ_i N M_i`.
    pub fn cost(&self) -> u64 {
        let n = self.y.len() as u64;
        self.config.cloud_sizes.iter().map(|&m| n * m as u64).sum()
    }
}

/// Values of the solution at index `i`: `(y, Some(z))` for `i < N`, and
/// `(Φ(x), None)` at `i = N`.
pub fn evaluate_solution(sol: &MwlsSolution, i: usize, x: &[f64]) -> Result<(f64, Option<Vec<f64>>)> {
    let n = sol.len();
    if i > n {
        return Err(Error::IndexOutOfRange {
            index: i,
            expected: format!("0 <= i <= {n}"),
        });
    }
    if x.len() != sol.problem.model.dim() {
        return Err(Error::param("x", "dimension does not match the model"));
    }
    if i == n {
        return Ok((sol.problem.terminal.value(x), None));
    }
    let mut z = vec![0.0; sol.z[i].outputs()];
    sol.z[i].evaluate(x, &mut z);
    Ok((sol.y[i].value(x), Some(z)))
}

/// Hook called with every cloud right after it has been drawn.
pub type CloudObserver<'a> = &'a (dyn Fn(&SimulationCloud) -> Result<()> + Sync);

struct Fitted<'a> {
    y: &'a [Option<LocalPolynomialEstimator>],
    z: &'a [Option<LocalPolynomialEstimator>],
    terminal: &'a dyn Terminal,
    n: usize,
}

impl Fitted<'_> {
    fn y_at(&self, k: usize, x: &[f64]) -> f64 {
        if k == self.n {
            self.terminal.value(x)
        } else {
            self.y[k].as_ref().expect("fitted backward").value(x)
        }
    }

    fn z_at(&self, k: usize, x: &[f64], out: &mut [f64]) {
        self.z[k].as_ref().expect("fitted backward").evaluate(x, out);
    }
}

/// Driver term `f_k` on row `m` of a cloud started at `i`.
fn driver_term(
    problem: &Problem,
    fitted: &Fitted<'_>,
    cloud: &SimulationCloud,
    m: usize,
    k: usize,
    zbuf: &mut [f64],
) -> Result<f64> {
    let i = cloud.index();
    let xk = cloud.state(m, k - i);
    let y_next = fitted.y_at(k + 1, cloud.state(m, k + 1 - i));
    fitted.z_at(k, xk, zbuf);
    let f = problem.driver.value(&problem.grid, k, xk, y_next, zbuf);
    if !f.is_finite() {
        return Err(Error::NonFiniteTerm { index: i, term: k });
    }
    Ok(f)
}

/// Per-row partial sums shared by the two responses of one index.
struct RowSums {
    terminal: f64,
    /// `Σ_{k>i} f_k Δ_k`.
    tail: f64,
}

/// `Z` responses of every row (`rows * q` values) and the shared sums.
fn build_z_responses(
    problem: &Problem,
    fitted: &Fitted<'_>,
    cloud: &SimulationCloud,
) -> Result<(Vec<f64>, Vec<RowSums>)> {
    let grid = &problem.grid;
    let n = grid.len();
    let i = cloud.index();
    let q = cloud.weight_dim();
    let mut responses = vec![0.0; cloud.len() * q];
    let sums = responses
        .par_chunks_mut(q)
        .enumerate()
        .map(|(m, out)| -> Result<RowSums> {
            let terminal = problem.terminal.value(cloud.state(m, n - i));
            if !terminal.is_finite() {
                return Err(Error::NonFiniteTerm { index: i, term: n });
            }
            for (o, h) in out.iter_mut().zip(cloud.weight(m, n - i)) {
                *o = terminal * h;
            }
            let mut zbuf = vec![0.0; q];
            let mut tail = 0.0;
            for k in i + 1..n {
                let f = driver_term(problem, fitted, cloud, m, k, &mut zbuf)?;
                let fd = f * grid.step(k);
                tail += fd;
                for (o, h) in out.iter_mut().zip(cloud.weight(m, k - i)) {
                    *o += fd * h;
                }
            }
            Ok(RowSums { terminal, tail })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((responses, sums))
}

/// `Y` responses of every row, given the `z` estimator of the same index.
fn build_y_responses(
    problem: &Problem,
    fitted: &Fitted<'_>,
    cloud: &SimulationCloud,
    sums: &[RowSums],
) -> Result<Vec<f64>> {
    let i = cloud.index();
    let q = cloud.weight_dim();
    let step = problem.grid.step(i);
    sums.par_iter()
        .enumerate()
        .map(|(m, s)| {
            let mut zbuf = vec![0.0; q];
            let f = driver_term(problem, fitted, cloud, m, i, &mut zbuf)?;
            Ok(s.terminal + f * step + s.tail)
        })
        .collect()
}

/// Runs the backward scheme.
pub fn mwls_solve(
    problem: &Problem,
    config: &SolverConfig,
    observer: Option<CloudObserver<'_>>,
) -> Result<MwlsSolution> {
    config.validate(problem)?;
    let grid = &problem.grid;
    let n = grid.len();
    let d = problem.model.dim();
    let q = problem.model.weight_dim();
    let pc = problem.constants()?;
    let bounds = BoundsTable::compute(&pc, grid, None)?;
    let streams = StreamFactory::new(config.seed);

    let mut y: Vec<Option<LocalPolynomialEstimator>> = vec![None; n];
    let mut z: Vec<Option<LocalPolynomialEstimator>> = vec![None; n];
    let mut diagnostics = Vec::with_capacity(n);
    let mut fit_order = Vec::with_capacity(2 * n);

    for i in (0..n).rev() {
        let (basis_y, basis_z) = config.effective_bases(i)?;
        let cloud = sample_cloud(
            problem.model.as_ref(),
            grid,
            &config.initial,
            i,
            config.cloud_sizes[i],
            &streams,
            Domain::Cloud,
        )?;
        if let Some(obs) = observer {
            obs(&cloud)?;
        }
        let states: Vec<f64> = (0..cloud.len())
            .flat_map(|m| cloud.state(m, 0).to_vec())
            .collect();
        let wrap = |e: Error| Error::Regression {
            index: i,
            source: Box::new(e),
        };

        let (z_resp, sums) = {
            let fitted = Fitted {
                y: &y,
                z: &z,
                terminal: problem.terminal.as_ref(),
                n,
            };
            build_z_responses(problem, &fitted, &cloud)?
        };
        let z_fit = ols_fit(&z_resp, q, &basis_z, &states)
            .map_err(wrap)?
            .truncated(bounds.c_z[i])?;
        z[i] = Some(z_fit);
        fit_order.push((i, Component::Z));

        let y_resp = {
            let fitted = Fitted {
                y: &y,
                z: &z,
                terminal: problem.terminal.as_ref(),
                n,
            };
            build_y_responses(problem, &fitted, &cloud, &sums)?
        };
        let y_fit = ols_fit(&y_resp, 1, &basis_y, &states)
            .map_err(wrap)?
            .truncated(bounds.c_y[i])?;
        y[i] = Some(y_fit);
        fit_order.push((i, Component::Y));

        let rows = cloud.len() as f64;
        diagnostics.push(IndexDiagnostics {
            index: i,
            cloud_size: cloud.len(),
            k_y: basis_y.dimension(),
            k_z: basis_z.dimension(),
            max_abs_y_response: y_resp.iter().fold(0.0, |a, v| a.max(v.abs())),
            mean_sq_z_response: z_resp.iter().map(|v| v * v).sum::<f64>() / rows,
            states,
        });
        debug_assert_eq!(d, cloud.dim());
    }
    diagnostics.reverse();

    Ok(MwlsSolution {
        problem: problem.clone(),
        config: config.clone(),
        bounds,
        y: y.into_iter().map(|e| e.expect("every index fitted")).collect(),
        z: z.into_iter().map(|e| e.expect("every index fitted")).collect(),
        diagnostics,
        fit_order,
    })
}

/// Responses of index `i` for one cloud against an already computed solution,
/// as `(S_Y, S_Z)` per row. Intended for inspection and tests.
pub fn responses_for_cloud(sol: &MwlsSolution, cloud: &SimulationCloud) -> Result<(Vec<f64>, Vec<f64>)> {
    let y: Vec<Option<LocalPolynomialEstimator>> = sol.y.iter().cloned().map(Some).collect();
    let z: Vec<Option<LocalPolynomialEstimator>> = sol.z.iter().cloned().map(Some).collect();
    let fitted = Fitted {
        y: &y,
        z: &z,
        terminal: sol.problem.terminal.as_ref(),
        n: sol.len(),
    };
    let (zr, sums) = build_z_responses(&sol.problem, &fitted, cloud)?;
    let yr = build_y_responses(&sol.problem, &fitted, cloud, &sums)?;
    Ok((yr, zr))
}
