//! Convergence studies: one solver run per sweep point, errors measured
//! against the oracle, and log-log slopes of error against the parameter.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use super::benchmarks::{benchmark, BenchmarkId, BenchmarkParams};
use super::errors::estimate_errors;
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::model::InitialLaw;
use crate::regression::{ols_fit, LocalPolynomialBasis};
use crate::report::{fmt_f64, Cell, Table};
use crate::rng::{Domain, StreamFactory};
use crate::solver::{mwls_solve, SolverConfig};

/// Which setting varies along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParameter {
    /// Cloud size `M`, the same at every index.
    CloudSize,
    /// Cell edge `δ` of both bases.
    Delta,
    /// Number of time steps `N`.
    Steps,
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CloudSize => "m",
            Self::Delta => "delta",
            Self::Steps => "n",
        })
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "m" => Ok(Self::CloudSize),
            "delta" => Ok(Self::Delta),
            "n" => Ok(Self::Steps),
            _ => Err(Error::param("sweep.parameter", format!("expected m, delta or n, got `{s}`"))),
        }
    }
}

/// Baseline setting of a study and the values of the swept parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub benchmark: BenchmarkId,
    pub params: BenchmarkParams,
    pub horizon: f64,
    pub n: usize,
    /// Grid exponent; 1 gives the uniform grid.
    pub theta_grid: f64,
    pub degree_y: u32,
    pub degree_z: u32,
    pub delta: f64,
    pub radius: f64,
    pub m: usize,
    pub initial: InitialLaw,
    pub seed: u64,
    pub fresh_m: usize,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Independent runs per value; errors are averaged in mean square.
    pub replicates: usize,
    /// Index whose error is tracked; the middle of the grid when absent.
    pub probe: Option<usize>,
}

/// One run of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPoint {
    pub value: f64,
    pub replicate: usize,
    pub seed: u64,
    pub cost: u64,
    pub probe: usize,
    /// Cloud norms at the probe index.
    pub err_y: f64,
    pub err_z: f64,
    /// Fresh-sample norms at the probe index.
    pub fresh_y: f64,
    pub fresh_z: f64,
}

/// Errors aggregated over replicates, for each swept value.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub value: f64,
    pub fresh_y: f64,
    pub fresh_z: f64,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyResult {
    pub parameter: SweepParameter,
    pub points: Vec<StudyPoint>,
    pub summary: Vec<StudySummary>,
    /// Log-log slopes of the aggregated fresh errors against the parameter.
    pub slope_y: f64,
    pub slope_z: f64,
}

impl StudyResult {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "parameter",
            "value",
            "replicate",
            "seed",
            "cost",
            "probe",
            "err_y",
            "err_z",
            "fresh_y",
            "fresh_z",
        ]);
        for p in &self.points {
            t.push(vec![
                Cell::from(self.parameter.to_string()),
                p.value.into(),
                p.replicate.into(),
                p.seed.into(),
                p.cost.into(),
                p.probe.into(),
                p.err_y.into(),
                p.err_z.into(),
                p.fresh_y.into(),
                p.fresh_z.into(),
            ]);
        }
        t
    }

    /// Aggregated errors followed by the two slopes.
    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["parameter", "value", "cost", "fresh_y", "fresh_z"]);
        for s in &self.summary {
            t.push(vec![
                Cell::from(self.parameter.to_string()),
                s.value.into(),
                s.cost.into(),
                s.fresh_y.into(),
                s.fresh_z.into(),
            ]);
        }
        t.push(vec![
            Cell::from(self.parameter.to_string()),
            "slope".into(),
            "".into(),
            self.slope_y.into(),
            self.slope_z.into(),
        ]);
        t
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn as_count(v: f64, name: &'static str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v < usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::param(name, format!("sweep value {v} is not a positive integer")))
    }
}

fn run_point(spec: &SweepSpec, value: f64, replicate: usize) -> Result<StudyPoint> {
    let (mut n, mut m, mut delta) = (spec.n, spec.m, spec.delta);
    match spec.parameter {
        SweepParameter::CloudSize => m = as_count(value, "m")?,
        SweepParameter::Delta => delta = value,
        SweepParameter::Steps => n = as_count(value, "n")?,
    }
    let grid = if spec.theta_grid == 1.0 {
        TimeGrid::uniform(spec.horizon, n)?
    } else {
        TimeGrid::theta(spec.horizon, n, spec.theta_grid)?
    };
    let bench = benchmark(spec.benchmark, grid, &spec.params)?;
    let d = bench.problem.model.dim();
    let by = LocalPolynomialBasis::new(spec.degree_y, delta, spec.radius, d)?;
    let bz = LocalPolynomialBasis::new(spec.degree_z, delta, spec.radius, d)?;
    let seed = spec.seed.wrapping_add(replicate as u64);
    let config = SolverConfig::uniform(n, by, bz, m, spec.initial.clone(), seed);
    let sol = mwls_solve(&bench.problem, &config, None)?;
    let report = estimate_errors(&sol, bench.oracle.as_ref(), spec.fresh_m, seed)?;
    let probe = spec.probe.unwrap_or(n / 2);
    let row = report.rows.get(probe).ok_or_else(|| Error::IndexOutOfRange {
        index: probe,
        expected: format!("0 <= probe < {n}"),
    })?;
    Ok(StudyPoint {
        value,
        replicate,
        seed,
        cost: report.cost,
        probe,
        err_y: row.err_y,
        err_z: row.err_z,
        fresh_y: row.fresh_y,
        fresh_z: row.fresh_z,
    })
}

/// Runs every `(value, replicate)` pair in parallel and collects the results
/// in sweep order.
pub fn convergence_study(spec: &SweepSpec) -> Result<StudyResult> {
    if spec.values.len() < 2 {
        return Err(Error::param("sweep.values", "need at least two values"));
    }
    if spec.replicates == 0 {
        return Err(Error::param("sweep.replicates", "must be at least 1"));
    }
    let jobs: Vec<(f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.replicates).map(move |r| (v, r)))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(v, r)| run_point(spec, v, r))
        .collect::<Result<Vec<_>>>()?;

    let summary: Vec<StudySummary> = points
        .chunks(spec.replicates)
        .map(|c| {
            let k = c.len() as f64;
            StudySummary {
                value: c[0].value,
                fresh_y: (c.iter().map(|p| p.fresh_y.powi(2)).sum::<f64>() / k).sqrt(),
                fresh_z: (c.iter().map(|p| p.fresh_z.powi(2)).sum::<f64>() / k).sqrt(),
                cost: c[0].cost,
            }
        })
        .collect();
    let xs: Vec<f64> = summary.iter().map(|s| s.value).collect();
    let ys: Vec<f64> = summary.iter().map(|s| s.fresh_y).collect();
    let zs: Vec<f64> = summary.iter().map(|s| s.fresh_z).collect();
    Ok(StudyResult {
        parameter: spec.parameter,
        slope_y: loglog_slope(&xs, &ys),
        slope_z: loglog_slope(&xs, &zs),
        points,
        summary,
    })
}

/// Noise-free regression of a scalar target on `[-radius, radius]` with
/// piecewise polynomials of `degree`, for each cell edge in `deltas`. The
/// fit uses `samples` uniform points and the error is the root mean square
/// over an independent uniform sample of the same size. Returns
/// `(delta, error)` pairs and the log-log slope.
pub fn approximation_sweep<F: Fn(f64) -> f64 + Sync>(
    target: F,
    degree: u32,
    radius: f64,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(Vec<(f64, f64)>, f64)> {
    let streams = StreamFactory::new(seed);
    let draw = |index: usize| -> Vec<f64> {
        (0..samples)
            .into_par_iter()
            .map(|r| {
                let u: f64 = streams.stream(Domain::Auxiliary, index, r).random();
                radius * (2.0 * u - 1.0)
            })
            .collect()
    };
    let fit_x = draw(0);
    let test_x = draw(1);
    let fit_y: Vec<f64> = fit_x.iter().map(|&x| target(x)).collect();
    let rows = deltas
        .iter()
        .map(|&delta| {
            let basis = LocalPolynomialBasis::new(degree, delta, radius, 1)?;
            let est = ols_fit(&fit_y, 1, &basis, &fit_x)?;
            let mse = test_x
                .iter()
                .map(|&x| (target(x) - est.value(&[x])).powi(2))
                .sum::<f64>()
                / samples as f64;
            Ok((delta, mse.sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows.iter().cloned().unzip();
    Ok((rows, loglog_slope(&xs, &ys)))
}

/// Renders `(delta, error)` pairs with the slope as a final row.
pub fn approximation_table(rows: &[(f64, f64)], slope: f64) -> Table {
    let mut t = Table::new(["delta", "error"]);
    for &(d, e) in rows {
        t.push(vec![d.into(), e.into()]);
    }
    t.push(vec!["slope".into(), Cell::Text(fmt_f64(slope))]);
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn linear_pieces_converge_quadratically() {
        let (rows, slope) = approximation_sweep(|x| x.sin(), 1, 2.0, &[0.8, 0.4, 0.2, 0.1], 20_000, 7).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(slope > 1.8, "{slope}");
    }

    #[test]
    fn cost_column_is_bookkeeping() {
        let spec = SweepSpec {
            benchmark: BenchmarkId::B1,
            params: BenchmarkParams::default(),
            horizon: 1.0,
            n: 4,
            theta_grid: 1.0,
            degree_y: 1,
            degree_z: 1,
            delta: 1.0,
            radius: 3.0,
            m: 100,
            initial: InitialLaw::Box {
                center: vec![0.0],
                half_width: 1.0,
            },
            seed: 1,
            fresh_m: 100,
            parameter: SweepParameter::CloudSize,
            values: vec![100.0, 200.0],
            replicates: 2,
            probe: None,
        };
        let r = convergence_study(&spec).unwrap();
        assert_eq!(r.points.len(), 4);
        assert_eq!(r.points[0].cost, 4 * 4 * 100);
        assert_eq!(r.points[3].cost, 4 * 4 * 200);
        assert_eq!(r.summary_table().rows().len(), 3);
    }
}
