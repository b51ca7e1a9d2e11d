//! Run configuration: a TOML file with typed sections. Unknown keys are
//! rejected, every default is filled in before a run starts, and the resolved
//! configuration is what reports embed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::harness::{benchmark, Benchmark, BenchmarkId, BenchmarkParams, SweepParameter, SweepSpec};
use crate::model::InitialLaw;
use crate::regression::LocalPolynomialBasis;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub basis: BasisSection,
    pub samples: SamplesSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// `b1`, `b2`, `b3` or `b4`.
    pub id: String,
    #[serde(default = "defaults::clamp")]
    pub clamp: f64,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::theta_phi")]
    pub theta_phi: f64,
    #[serde(default = "defaults::cap")]
    pub cap: f64,
}

/// Either explicit `points`, or `horizon` and `steps` with an optional grid
/// exponent `theta` (1 gives the uniform grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "defaults::one")]
    pub theta: f64,
}

/// Local polynomial bases. `delta` applies to both regressions unless
/// `delta_y` or `delta_z` is given; per-index lists override scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub degree_y: u32,
    pub degree_z: u32,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_y: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_z: Option<Vec<f64>>,
}

/// Cloud sizes and the law of `X_0`. A missing or zero `x0_half_width`
/// starts every path at `x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<usize>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub x0_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::fresh_m")]
    pub fresh_m: usize,
    #[serde(default = "defaults::out")]
    pub out: String,
    /// Write every cloud as a binary file next to the reports.
    #[serde(default)]
    pub dump_clouds: bool,
    /// Write the estimator coefficients of every index.
    #[serde(default)]
    pub dump_coefficients: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            fresh_m: defaults::fresh_m(),
            out: defaults::out(),
            dump_clouds: false,
            dump_coefficients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `m`, `delta` or `n`.
    pub parameter: String,
    pub values: Vec<f64>,
    #[serde(default = "defaults::replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<usize>,
}

/// Dotted key (`section.key`) of the line holding byte `offset`.
fn key_at(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line_start = before.rfind('\n').map_or(0, |p| p + 1);
    let line = text[line_start..].lines().next().unwrap_or("");
    let section = before[..line_start]
        .lines()
        .rev()
        .find_map(|l| l.trim().strip_prefix('[')?.strip_suffix(']').map(str::to_owned));
    let name = line.split('=').next().unwrap_or("").trim();
    match (section, name.is_empty() || name.starts_with('[')) {
        (Some(s), false) => format!("{s}.{name}"),
        (Some(s), true) => s,
        (None, false) => name.to_owned(),
        (None, true) => "<document>".into(),
    }
}

mod defaults {
    pub fn clamp() -> f64 {
        12.0
    }
    pub fn alpha() -> f64 {
        0.5
    }
    pub fn theta_phi() -> f64 {
        0.5
    }
    pub fn cap() -> f64 {
        2.0
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn fresh_m() -> usize {
        100_000
    }
    pub fn out() -> String {
        "out".into()
    }
    pub fn replicates() -> usize {
        1
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Everything needed to run the solver, derived from a [`RunConfig`].
#[derive(Clone)]
pub struct ResolvedRun {
    pub benchmark: Benchmark,
    pub solver: SolverConfig,
    pub fresh_m: usize,
}

impl RunConfig {
    /// Parses TOML text. Syntax errors, unknown keys and type mismatches are
    /// reported with the offending key path.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .map(|s| key_at(text, s.start))
                .unwrap_or_else(|| "<document>".into());
            config_err(&key, e.message().trim_end().replace('\n', " | "))
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The configuration as TOML, with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is serializable")
    }

    pub fn benchmark_id(&self) -> Result<BenchmarkId> {
        self.problem.id.parse()
    }

    pub fn benchmark_params(&self) -> BenchmarkParams {
        BenchmarkParams {
            clamp: self.problem.clamp,
            alpha: self.problem.alpha,
            theta_phi: self.problem.theta_phi,
            cap: self.problem.cap,
        }
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        let g = &self.grid;
        match (&g.points, g.horizon, g.steps) {
            (Some(p), None, None) => {
                if g.theta != 1.0 {
                    return Err(config_err("grid.theta", "not allowed with explicit points"));
                }
                TimeGrid::from_points(p.clone())
            }
            (None, Some(t), Some(n)) if g.theta == 1.0 => TimeGrid::uniform(t, n),
            (None, Some(t), Some(n)) => TimeGrid::theta(t, n, g.theta),
            _ => Err(config_err(
                "grid",
                "give either `points` or both `horizon` and `steps`",
            )),
        }
    }

    fn per_index<T: Copy>(key: &str, list: &Option<Vec<T>>, scalar: Option<T>, n: usize) -> Result<Vec<T>> {
        match (list, scalar) {
            (Some(v), _) if v.len() == n => Ok(v.clone()),
            (Some(v), _) => Err(config_err(key, format!("need {n} entries, got {}", v.len()))),
            (None, Some(s)) => Ok(vec![s; n]),
            (None, None) => Err(config_err(key, "missing")),
        }
    }

    /// Builds the benchmark and the solver configuration, with `seed`
    /// overriding `run.seed` when given.
    pub fn resolve(&self) -> Result<ResolvedRun> {
        let grid = self.time_grid()?;
        let n = grid.len();
        let bench = benchmark(self.benchmark_id()?, grid, &self.benchmark_params())?;
        let d = bench.problem.model.dim();
        let b = &self.basis;
        let dy = Self::per_index("basis.delta_y", &b.delta_y, b.delta, n)?;
        let dz = Self::per_index("basis.delta_z", &b.delta_z, b.delta, n)?;
        let basis_y = dy
            .iter()
            .map(|&dl| LocalPolynomialBasis::new(b.degree_y, dl, b.radius, d))
            .collect::<Result<Vec<_>>>()?;
        let basis_z = dz
            .iter()
            .map(|&dl| LocalPolynomialBasis::new(b.degree_z, dl, b.radius, d))
            .collect::<Result<Vec<_>>>()?;
        let cloud_sizes = Self::per_index("samples.schedule", &self.samples.schedule, self.samples.m, n)?;
        let s = &self.samples;
        let initial = if s.x0_half_width == 0.0 {
            InitialLaw::Point(s.x0.clone())
        } else {
            InitialLaw::Box {
                center: s.x0.clone(),
                half_width: s.x0_half_width,
            }
        };
        initial.validate()?;
        Ok(ResolvedRun {
            benchmark: bench,
            solver: SolverConfig {
                basis_y,
                basis_z,
                cloud_sizes,
                initial,
                seed: self.run.seed,
            },
            fresh_m: self.run.fresh_m,
        })
    }

    /// Sweep specification from the `[sweep]` section. The baseline uses the
    /// scalar `basis.delta`, `samples.m` and the grid `horizon`/`steps`.
    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let sw = self
            .sweep
            .as_ref()
            .ok_or_else(|| config_err("sweep", "section required for a sweep"))?;
        let parameter: SweepParameter = sw.parameter.parse()?;
        let need = |v: Option<f64>, key: &str| v.ok_or_else(|| config_err(key, "required for a sweep"));
        let resolved = self.resolve()?;
        Ok(SweepSpec {
            benchmark: self.benchmark_id()?,
            params: self.benchmark_params(),
            horizon: need(self.grid.horizon, "grid.horizon")?,
            n: self
                .grid
                .steps
                .ok_or_else(|| config_err("grid.steps", "required for a sweep"))?,
            theta_grid: self.grid.theta,
            degree_y: self.basis.degree_y,
            degree_z: self.basis.degree_z,
            delta: need(self.basis.delta, "basis.delta")?,
            radius: self.basis.radius,
            m: self
                .samples
                .m
                .ok_or_else(|| config_err("samples.m", "required for a sweep"))?,
            initial: resolved.solver.initial,
            seed: self.run.seed,
            fresh_m: self.run.fresh_m,
            parameter,
            values: sw.values.clone(),
            replicates: sw.replicates,
            probe: sw.probe,
        })
    }
}

/// The documented B1 configuration.
pub const B1_EXAMPLE: &str = r#"[problem]
id = "b1"

[grid]
horizon = 1.0
steps = 10

[basis]
degree_y = 1
degree_z = 1
delta = 0.5
radius = 4.0

[samples]
m = 10000
x0 = [0.0]
x0_half_width = 2.5

[run]
seed = 1
fresh_m = 100000
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_resolves() {
        let c = RunConfig::parse(B1_EXAMPLE).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.solver.cloud_sizes, vec![10_000; 10]);
        assert_eq!(r.solver.basis_y[0].dimension(), 32);
        assert_eq!(r.benchmark.id, BenchmarkId::B1);
        // Defaults appear in the resolved text.
        let text = c.to_toml();
        assert!(text.contains("clamp = 12.0"));
        assert!(text.contains("dump_clouds = false"));
        assert_eq!(RunConfig::parse(&text).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_its_path() {
        let text = B1_EXAMPLE.replace("delta = 0.5", "delta = 0.5\nwidth = 3");
        let err = RunConfig::parse(&text).unwrap_err();
        assert!(err.is_validation());
        let msg = err.to_string();
        assert!(msg.contains("width"), "{msg}");
        assert!(msg.contains("`basis.width`"), "{msg}");
    }

    #[test]
    fn type_mismatch_is_reported() {
        let text = B1_EXAMPLE.replace("\nm = 10000", "\nm = \"many\"");
        let msg = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains("`samples.m`"), "{msg}");
    }

    #[test]
    fn grid_forms() {
        let text = B1_EXAMPLE.replace("horizon = 1.0\nsteps = 10", "points = [0.0, 0.5, 1.0]");
        let g = RunConfig::parse(&text).unwrap().time_grid().unwrap();
        assert_eq!(g.len(), 2);
        let text = B1_EXAMPLE.replace("steps = 10", "steps = 10\ntheta = 0.5");
        let g = RunConfig::parse(&text).unwrap().time_grid().unwrap();
        assert!(g.step(9) < g.step(0));
        let text = B1_EXAMPLE.replace("steps = 10", "");
        assert!(RunConfig::parse(&text).unwrap().time_grid().is_err());
    }

    #[test]
    fn schedule_length_checked() {
        let text = B1_EXAMPLE.replace("\nm = 10000", "\nschedule = [100, 200]");
        let err = RunConfig::parse(&text).unwrap().resolve().err().unwrap();
        assert!(err.to_string().contains("samples.schedule"));
    }
}
