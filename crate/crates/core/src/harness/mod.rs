//! Benchmarks with exact solutions, error measurement, parameter tuning and
//! convergence studies.

mod benchmarks;
mod errors;
mod study;
mod tuning;

pub use benchmarks::{
    benchmark, linear_factors, monte_carlo_heat, nested_linear_y, register_benchmarks, Benchmark,
    BenchmarkId, BenchmarkParams, ClampedIdentity, HeatKernelOracle, HolderTerminal, LinearOracle,
    Oracle, TanhTerminal,
};
pub use errors::{estimate_errors, sup_errors, ErrorReport, IndexErrors};
pub use study::{
    approximation_sweep, approximation_table, convergence_study, loglog_slope, StudyPoint,
    StudyResult, StudySummary, SweepParameter, SweepSpec,
};
pub use tuning::{tune_parameters, Regime, TuningInputs, TuningPlan, TuningRow};
