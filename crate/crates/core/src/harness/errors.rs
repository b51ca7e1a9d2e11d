//! Error norms of a solution against an oracle.

use rayon::prelude::*;

use super::benchmarks::Oracle;
use crate::constants::{dep_errors, global_error_bound, GlobalErrorBound, LocalErrorInputs};
use crate::error::{Error, Result};
use crate::model::sample_cloud;
use crate::regression::ols_fit;
use crate::report::{Cell, Table};
use crate::rng::{Domain, StreamFactory};
use crate::solver::MwlsSolution;

/// Per-index error measurements of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexErrors {
    pub index: usize,
    pub t: f64,
    pub cloud_size: usize,
    pub k_y: usize,
    pub k_z: usize,
    /// `‖y_i - y^M_i‖` on the regression cloud.
    pub err_y: f64,
    pub err_z: f64,
    /// The same norms on fresh samples of `X_i`.
    pub fresh_y: f64,
    pub fresh_z: f64,
    /// Standard errors of the fresh norms.
    pub fresh_y_se: f64,
    pub fresh_z_se: f64,
    /// `‖y_i‖` on the fresh samples, the scale of relative errors.
    pub fresh_norm_y: f64,
    /// Distance from the exact solution to the regression space, on the cloud.
    pub app_y: f64,
    pub app_z: f64,
    pub dep_y: f64,
    pub dep_z: f64,
    pub bound_y: f64,
    pub bound_z: f64,
}

impl IndexErrors {
    /// Fresh norm bounded by `√2` times the cloud norm plus the dependence
    /// error, for `Y` and `Z`.
    pub fn norm_relation_holds(&self) -> (bool, bool) {
        let s = 2f64.sqrt();
        (
            self.fresh_y <= s * self.err_y + self.dep_y,
            self.fresh_z <= s * self.err_z + self.dep_z,
        )
    }

    /// `fresh_y / fresh_norm_y`.
    pub fn relative_y(&self) -> f64 {
        self.fresh_y / self.fresh_norm_y
    }

    /// Cloud norms below the global bound.
    pub fn bound_holds(&self) -> (bool, bool) {
        (self.err_y <= self.bound_y, self.err_z <= self.bound_z)
    }
}

/// Error report of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<IndexErrors>,
    pub global: GlobalErrorBound,
    /// `Σ_i N M_i`.
    pub cost: u64,
    pub fresh_samples: usize,
    pub seed: u64,
}

impl ErrorReport {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "index",
            "t_i",
            "M",
            "K_y",
            "K_z",
            "err_y",
            "err_z",
            "fresh_y",
            "fresh_z",
            "fresh_y_se",
            "fresh_z_se",
            "fresh_norm_y",
            "app_y",
            "app_z",
            "dep_y",
            "dep_z",
            "bound_y",
            "bound_z",
        ]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.index),
                r.t.into(),
                r.cloud_size.into(),
                r.k_y.into(),
                r.k_z.into(),
                r.err_y.into(),
                r.err_z.into(),
                r.fresh_y.into(),
                r.fresh_z.into(),
                r.fresh_y_se.into(),
                r.fresh_z_se.into(),
                r.fresh_norm_y.into(),
                r.app_y.into(),
                r.app_z.into(),
                r.dep_y.into(),
                r.dep_z.into(),
                r.bound_y.into(),
                r.bound_z.into(),
            ]);
        }
        t
    }
}

/// Root mean square of `values` with the standard error of the root, by the
/// delta method on the mean of squares.
fn rms_with_se(sq: &[f64]) -> (f64, f64) {
    let m = sq.len() as f64;
    let mean = sq.iter().sum::<f64>() / m;
    let rms = mean.sqrt();
    if sq.len() < 2 || rms == 0.0 {
        return (rms, 0.0);
    }
    let var = sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (rms, (var / m).sqrt() / (2.0 * rms))
}

/// Oracle values `(y, z)` at each state; `z` holds `q` entries per state.
fn oracle_values(sol: &MwlsSolution, oracle: &dyn Oracle, i: usize, states: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = sol.problem.model.dim();
    let q = sol.problem.model.weight_dim();
    let pairs: Vec<(f64, Vec<f64>)> = states
        .par_chunks(d)
        .map(|x| {
            let mut z = vec![0.0; q];
            let y = oracle.values(i, x, &mut z);
            (y, z)
        })
        .collect();
    let ys = pairs.iter().map(|p| p.0).collect();
    let zs = pairs.into_iter().flat_map(|p| p.1).collect();
    (ys, zs)
}

/// Squared errors `(|y - y^M|², |z - z^M|²)` at each state, given the oracle
/// values there.
fn squared_errors(sol: &MwlsSolution, i: usize, states: &[f64], ys: &[f64], zs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = sol.problem.model.dim();
    let q = sol.problem.model.weight_dim();
    states
        .par_chunks(d)
        .enumerate()
        .map(|(m, x)| {
            let ey = (ys[m] - sol.y[i].value(x)).powi(2);
            let mut zm = vec![0.0; q];
            sol.z[i].evaluate(x, &mut zm);
            let ez: f64 = zs[m * q..(m + 1) * q].iter().zip(&zm).map(|(a, b)| (a - b).powi(2)).sum();
            (ey, ez)
        })
        .unzip()
}

/// Root mean square residual of the least-squares projection of the oracle
/// onto the regression spaces of index `i`, on the cloud states.
fn approximation_errors(sol: &MwlsSolution, i: usize, states: &[f64], ys: &[f64], zs: &[f64]) -> Result<(f64, f64)> {
    let d = sol.problem.model.dim();
    let q = sol.problem.model.weight_dim();
    let fy = ols_fit(ys, 1, sol.y[i].basis(), states)?;
    let fz = ols_fit(zs, q, sol.z[i].basis(), states)?;
    let (sy, sz): (Vec<f64>, Vec<f64>) = states
        .par_chunks(d)
        .enumerate()
        .map(|(m, x)| {
            let ry = (ys[m] - fy.value(x)).powi(2);
            let mut v = vec![0.0; q];
            fz.evaluate(x, &mut v);
            let rz: f64 = v
                .iter()
                .zip(&zs[m * q..(m + 1) * q])
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            (ry, rz)
        })
        .unzip();
    Ok((rms_with_se(&sy).0, rms_with_se(&sz).0))
}

/// Measures the errors of `sol` against `oracle`: on the regression clouds,
/// on `fresh_m` fresh samples per index drawn from the evaluation streams of
/// `seed`, and through the global bound fed with the measured approximation
/// errors.
pub fn estimate_errors(sol: &MwlsSolution, oracle: &dyn Oracle, fresh_m: usize, seed: u64) -> Result<ErrorReport> {
    if fresh_m == 0 {
        return Err(Error::param("fresh_m", "must be at least 1"));
    }
    let n = sol.len();
    let grid = &sol.problem.grid;
    let q = sol.problem.model.weight_dim();
    let streams = StreamFactory::new(seed);
    let pc = sol.problem.constants()?;

    let mut partial = Vec::with_capacity(n);
    let mut app_y = Vec::with_capacity(n);
    let mut app_z = Vec::with_capacity(n);
    for i in 0..n {
        let diag = &sol.diagnostics[i];
        let (cy, cz) = oracle_values(sol, oracle, i, &diag.states);
        let (sy, sz) = squared_errors(sol, i, &diag.states, &cy, &cz);
        let fresh = sample_cloud(
            sol.problem.model.as_ref(),
            grid,
            &sol.config.initial,
            i,
            fresh_m,
            &streams,
            Domain::Evaluation,
        )?;
        let fresh_states: Vec<f64> = (0..fresh.len()).flat_map(|m| fresh.state(m, 0).to_vec()).collect();
        let (fresh_ys, fresh_zs) = oracle_values(sol, oracle, i, &fresh_states);
        let (fy, fz) = squared_errors(sol, i, &fresh_states, &fresh_ys, &fresh_zs);
        let oy: Vec<f64> = fresh_ys.iter().map(|v| v * v).collect();
        let (ay, az) = approximation_errors(sol, i, &diag.states, &cy, &cz)?;
        app_y.push(ay);
        app_z.push(az);
        partial.push((
            rms_with_se(&sy).0,
            rms_with_se(&sz).0,
            rms_with_se(&fy),
            rms_with_se(&fz),
            rms_with_se(&oy).0,
        ));
    }

    let inputs = LocalErrorInputs {
        app_y: app_y.clone(),
        app_z: app_z.clone(),
        k_y: sol.diagnostics.iter().map(|d| d.k_y).collect(),
        k_z: sol.diagnostics.iter().map(|d| d.k_z).collect(),
        m: sol.diagnostics.iter().map(|d| d.cloud_size).collect(),
    };
    let global = global_error_bound(&pc, grid, &inputs)?;

    let rows = (0..n)
        .map(|i| {
            let (ey, ez, (fy, fy_se), (fz, fz_se), norm_y) = partial[i];
            Ok(IndexErrors {
                index: i,
                t: grid.t(i),
                cloud_size: inputs.m[i],
                k_y: inputs.k_y[i],
                k_z: inputs.k_z[i],
                err_y: ey,
                err_z: ez,
                fresh_y: fy,
                fresh_z: fz,
                fresh_y_se: fy_se,
                fresh_z_se: fz_se,
                fresh_norm_y: norm_y,
                app_y: app_y[i],
                app_z: app_z[i],
                dep_y: dep_errors(sol.bounds.c_y[i], inputs.k_y[i], inputs.m[i], q, false)?,
                dep_z: dep_errors(sol.bounds.c_z[i], inputs.k_z[i], inputs.m[i], q, true)?,
                bound_y: global.bound_y[i],
                bound_z: global.bound_z[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ErrorReport {
        rows,
        global,
        cost: sol.cost(),
        fresh_samples: fresh_m,
        seed,
    })
}

/// Largest `|y_i - y^M_i|` and `|z_i - z^M_i|` over `points`, per index `i < N`.
pub fn sup_errors(sol: &MwlsSolution, oracle: &dyn Oracle, points: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let q = sol.problem.model.weight_dim();
    (0..sol.len())
        .map(|i| {
            points.iter().fold((0.0_f64, 0.0_f64), |(sy, sz), x| {
                let ey = (oracle.y(i, x) - sol.y[i].value(x)).abs();
                let (mut zo, mut zm) = (vec![0.0; q], vec![0.0; q]);
                oracle.z(i, x, &mut zo);
                sol.z[i].evaluate(x, &mut zm);
                let ez = zo.iter().zip(&zm).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs()));
                (sy.max(ey), sz.max(ez))
            })
        })
        .collect()
}
