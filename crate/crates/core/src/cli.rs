//! Subcommand implementations behind the `mwls` binary. Each command returns
//! or writes plain comma-separated tables; every report starts with the
//! resolved configuration and seeds as `#` comment lines.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::grid::TimeGrid;
use crate::harness::{
    convergence_study, estimate_errors, tune_parameters, BenchmarkId, ErrorReport, TuningInputs,
};
use crate::report::{fmt_f64, Cell, Table};
use crate::solver::{evaluate_solution, mwls_solve, MwlsSolution};
use crate::{Error, Result};

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub fresh_m: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(s) = self.seed {
            config.run.seed = s;
        }
        if let Some(m) = self.fresh_m {
            config.run.fresh_m = m;
        }
        if let Some(o) = &self.out {
            config.run.out = o.display().to_string();
        }
    }
}

/// `#` lines with the resolved configuration and the seed set.
pub fn report_header(config: &RunConfig) -> String {
    let mut out = String::from("# resolved configuration\n");
    for line in config.to_toml().lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    let seed = config.run.seed;
    out.push_str(&format!("# seeds: cloud = {seed}, evaluation = {seed}\n"));
    out
}

fn write_report(dir: &Path, name: &str, header: &str, table: &Table) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, format!("{header}{table}"))?;
    Ok(path)
}

/// Per-index summary of a solution: bounds, response diagnostics and the
/// estimator values at the centre of the initial law.
pub fn solution_table(sol: &MwlsSolution) -> Result<Table> {
    let q = sol.problem.model.weight_dim();
    let mut header: Vec<String> = [
        "index",
        "t_i",
        "M",
        "K_y",
        "K_z",
        "C_y",
        "C_z",
        "Theta_y",
        "Theta_z",
        "max_abs_y_response",
        "mean_sq_z_response",
        "y_at_x0",
    ]
    .map(String::from)
    .to_vec();
    header.extend((0..q).map(|c| format!("z{c}_at_x0")));
    let mut t = Table::new(header);
    let x0 = match &sol.config.initial {
        crate::model::InitialLaw::Point(p) => p.clone(),
        crate::model::InitialLaw::Box { center, .. } => center.clone(),
    };
    for (i, d) in sol.diagnostics.iter().enumerate() {
        let (y, z) = evaluate_solution(sol, i, &x0)?;
        let mut row = vec![
            Cell::from(i),
            sol.problem.grid.t(i).into(),
            d.cloud_size.into(),
            d.k_y.into(),
            d.k_z.into(),
            sol.bounds.c_y[i].into(),
            sol.bounds.c_z[i].into(),
            sol.bounds.theta_y[i].into(),
            sol.bounds.theta_z[i].into(),
            d.max_abs_y_response.into(),
            d.mean_sq_z_response.into(),
            y.into(),
        ];
        row.extend(z.unwrap_or_default().into_iter().map(Cell::from));
        t.push(row);
    }
    Ok(t)
}

/// Files written by a run together with the in-memory results.
pub struct RunOutput {
    pub solution: MwlsSolution,
    pub errors: ErrorReport,
    pub files: Vec<PathBuf>,
}

/// Solves the configured problem and writes `solution.csv`, `errors.csv` and
/// `bounds.csv` (plus optional coefficient and cloud dumps) to `run.out`.
pub fn cmd_run(config: &RunConfig) -> Result<RunOutput> {
    let resolved = config.resolve()?;
    let dir = PathBuf::from(&config.run.out);
    fs::create_dir_all(&dir)?;
    let dump_dir = dir.clone();
    let dump = move |cloud: &crate::model::SimulationCloud| -> Result<()> {
        let f = fs::File::create(dump_dir.join(format!("cloud_{}.bin", cloud.index())))?;
        cloud.dump(std::io::BufWriter::new(f))
    };
    let observer: Option<crate::solver::CloudObserver<'_>> = if config.run.dump_clouds {
        Some(&dump)
    } else {
        None
    };
    let sol = mwls_solve(&resolved.benchmark.problem, &resolved.solver, observer)?;
    let errors = estimate_errors(
        &sol,
        resolved.benchmark.oracle.as_ref(),
        resolved.fresh_m,
        config.run.seed,
    )?;
    let header = report_header(config);
    let mut files = vec![
        write_report(&dir, "solution.csv", &header, &solution_table(&sol)?)?,
        write_report(&dir, "errors.csv", &header, &errors.to_table())?,
        write_report(&dir, "bounds.csv", &header, &sol.bounds.to_table())?,
    ];
    if config.run.dump_coefficients {
        for i in 0..sol.len() {
            for (name, est) in [("y", &sol.y[i]), ("z", &sol.z[i])] {
                let path = dir.join(format!("coefficients_{name}_{i}.csv"));
                fs::write(&path, format!("{header}{}", est.to_csv()))?;
                files.push(path);
            }
        }
    }
    if config.run.dump_clouds {
        files.extend((0..sol.len()).map(|i| dir.join(format!("cloud_{i}.bin"))));
    }
    Ok(RunOutput {
        solution: sol,
        errors,
        files,
    })
}

/// Bounds table of the configured problem; no simulation.
pub fn cmd_bounds(config: &RunConfig) -> Result<String> {
    let resolved = config.resolve()?;
    let problem = &resolved.benchmark.problem;
    let pc = problem.constants()?;
    let table = crate::constants::BoundsTable::compute(&pc, &problem.grid, None)?;
    Ok(format!("{}{}", report_header(config), table.to_table()))
}

/// Tuning plan on the uniform (`theta_grid = 1`) or `π^θ` grid of horizon `T`.
pub fn cmd_tune(inputs: TuningInputs, horizon: f64) -> Result<String> {
    let grid = if inputs.theta_grid == 1.0 {
        TimeGrid::uniform(horizon, inputs.n)?
    } else {
        TimeGrid::theta(horizon, inputs.n, inputs.theta_grid)?
    };
    Ok(tune_parameters(inputs, &grid)?.render())
}

/// Runs every registered benchmark with the grid, basis and samples of
/// `config`, writing one sub-directory per benchmark and a summary table
/// with the worst errors and the bound checks.
pub fn cmd_bench(config: &RunConfig) -> Result<String> {
    let mut summary = Table::new([
        "benchmark",
        "max_err_y",
        "max_err_z",
        "max_fresh_y",
        "max_fresh_z",
        "bound_holds",
        "norm_relation_holds",
        "cost",
    ]);
    let root = PathBuf::from(&config.run.out);
    for id in BenchmarkId::ALL {
        let mut c = config.clone();
        c.problem.id = id.name().into();
        c.run.out = root.join(id.name()).display().to_string();
        let out = cmd_run(&c)?;
        let rows = &out.errors.rows;
        let max = |f: fn(&crate::harness::IndexErrors) -> f64| rows.iter().map(f).fold(0.0, f64::max);
        let bound = rows.iter().all(|r| r.bound_holds() == (true, true));
        let relation = rows.iter().all(|r| r.norm_relation_holds() == (true, true));
        summary.push(vec![
            Cell::from(id.name()),
            max(|r| r.err_y).into(),
            max(|r| r.err_z).into(),
            max(|r| r.fresh_y).into(),
            max(|r| r.fresh_z).into(),
            Cell::from(bound.to_string()),
            Cell::from(relation.to_string()),
            out.errors.cost.into(),
        ]);
    }
    let text = format!("{}{}", report_header(config), summary);
    fs::create_dir_all(&root)?;
    fs::write(root.join("bench.csv"), &text)?;
    Ok(text)
}

/// Runs the `[sweep]` study and writes `sweep.csv` and `sweep_summary.csv`.
pub fn cmd_sweep(config: &RunConfig) -> Result<String> {
    let spec = config.sweep_spec()?;
    let result = convergence_study(&spec)?;
    let dir = PathBuf::from(&config.run.out);
    fs::create_dir_all(&dir)?;
    let header = report_header(config);
    write_report(&dir, "sweep.csv", &header, &result.to_table())?;
    let summary = result.summary_table();
    write_report(&dir, "sweep_summary.csv", &header, &summary)?;
    Ok(format!(
        "{header}{summary}# slope_y = {}\n# slope_z = {}\n",
        fmt_f64(result.slope_y),
        fmt_f64(result.slope_z)
    ))
}

/// Process exit status for a failure: 1 for invalid input, 2 for numerical
/// or I/O failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}
