use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mwls::cli::{self, Overrides};
use mwls::config::RunConfig;
use mwls::harness::{Regime, TuningInputs};

/// Least-squares Monte Carlo solver for discrete BSDEs with Malliavin weights.
#[derive(Parser)]
#[command(name = "mwls", version)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "MWLS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `run.fresh_m`.
    #[arg(long = "fresh-m")]
    fresh_m: Option<usize>,
}

impl Common {
    fn load(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::from_file(&self.config)?;
        Overrides {
            seed: self.seed,
            fresh_m: self.fresh_m,
            out: self.out.clone(),
        }
        .apply(&mut config);
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one benchmark and write solution, error and bound reports.
    Run(Common),
    /// Print the tuning plan for a target order.
    Tune(TuneArgs),
    /// Print the bound table of the configured problem.
    Bounds(Common),
    /// Run every benchmark with the configured grid, basis and samples.
    Bench(Common),
    /// Run the convergence study of the `[sweep]` section.
    Sweep(Common),
}

#[derive(Args)]
struct TuneArgs {
    /// Number of time steps.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    kappa: f64,
    /// Degree of the `Y` basis.
    #[arg(long, default_value_t = 1)]
    l: u32,
    /// State dimension.
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// `smooth` or `holder`.
    #[arg(long, default_value = "smooth")]
    regime: Regime,
    #[arg(long = "theta-grid", default_value_t = 1.0)]
    theta_grid: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Also write the plan to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("building the thread pool")?;
    }
    match cli.command {
        Command::Run(c) => {
            let out = cli::cmd_run(&c.load()?)?;
            for f in out.files {
                println!("{}", f.display());
            }
        }
        Command::Tune(a) => {
            let inputs = TuningInputs {
                n: a.n,
                kappa: a.kappa,
                l: a.l,
                d: a.d,
                lambda: a.lambda,
                regime: a.regime,
                theta_grid: a.theta_grid,
            };
            let text = cli::cmd_tune(inputs, a.horizon)?;
            if let Some(p) = a.out {
                std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
            }
            print!("{text}");
        }
        Command::Bounds(c) => print!("{}", cli::cmd_bounds(&c.load()?)?),
        Command::Bench(c) => print!("{}", cli::cmd_bench(&c.load()?)?),
        Command::Sweep(c) => print!("{}", cli::cmd_sweep(&c.load()?)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are not failures; usage errors are
            // validation errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<mwls::Error>() {
                Some(err) => cli::exit_code(err),
                None => 2,
            };
            ExitCode::from(code as u8)
        }
    }
}
