//! Parameter choices that balance approximation, statistical and
//! time-discretization errors.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::regression::LocalPolynomialBasis;
use crate::report::{comment_block, fmt_f64, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Solution with bounded derivatives up to order `l + 1`.
    Smooth,
    /// Bounded Hölder terminal with smoothing; parameters scale with `T - t_i`.
    Holder,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Smooth => "smooth",
            Regime::Holder => "holder",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smooth" => Ok(Regime::Smooth),
            "holder" | "hölder" => Ok(Regime::Holder),
            _ => Err(Error::param("regime", format!("expected smooth or holder, got `{s}`"))),
        }
    }
}

/// Inputs of [`tune_parameters`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningInputs {
    pub n: usize,
    /// Target convergence order `κ`.
    pub kappa: f64,
    /// Polynomial degree `l` of the `Y` basis; the `Z` basis uses `l - 1`.
    pub l: u32,
    pub d: usize,
    /// Exponential moment `λ` of the states.
    pub lambda: f64,
    pub regime: Regime,
    /// Exponent of the grid, reported in the complexity of the Hölder regime.
    pub theta_grid: f64,
}

/// Parameters at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningRow {
    pub index: usize,
    pub t: f64,
    pub delta_y: f64,
    pub delta_z: f64,
    /// Cloud size given by the formula, rounded up.
    pub m_formula: u64,
    pub k_y: usize,
    pub k_z: usize,
    /// `max(m_formula, k_y, k_z)`.
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningPlan {
    pub inputs: TuningInputs,
    pub radius: f64,
    pub rows: Vec<TuningRow>,
    /// `r` such that the error behaves like `cost^{-r}`, log factors aside.
    pub rate_exponent: f64,
}

impl TuningPlan {
    pub fn basis_y(&self, i: usize) -> Result<LocalPolynomialBasis> {
        LocalPolynomialBasis::new(self.inputs.l, self.rows[i].delta_y, self.radius, self.inputs.d)
    }

    pub fn basis_z(&self, i: usize) -> Result<LocalPolynomialBasis> {
        LocalPolynomialBasis::new(self.inputs.l - 1, self.rows[i].delta_z, self.radius, self.inputs.d)
    }

    /// `Σ_i N M_i`.
    pub fn cost(&self) -> u64 {
        let n = self.inputs.n as u64;
        self.rows.iter().map(|r| n * r.m).sum()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new([
            "index",
            "t_i",
            "delta_y",
            "delta_z",
            "M_formula",
            "K_y",
            "K_z",
            "M",
        ]);
        for r in &self.rows {
            t.push(vec![
                Cell::from(r.index),
                r.t.into(),
                r.delta_y.into(),
                r.delta_z.into(),
                r.m_formula.into(),
                r.k_y.into(),
                r.k_z.into(),
                r.m.into(),
            ]);
        }
        t
    }

    /// Header lines with the inputs, the radius and the rate, followed by the
    /// per-index table.
    pub fn render(&self) -> String {
        let i = &self.inputs;
        let pairs = [
            ("regime", i.regime.to_string()),
            ("N", i.n.to_string()),
            ("kappa", fmt_f64(i.kappa)),
            ("l", i.l.to_string()),
            ("d", i.d.to_string()),
            ("lambda", fmt_f64(i.lambda)),
            ("theta_grid", fmt_f64(i.theta_grid)),
            ("R", fmt_f64(self.radius)),
            ("rate_exponent", fmt_f64(self.rate_exponent)),
            ("cost", self.cost().to_string()),
        ]
        .map(|(k, v)| (k.to_string(), v));
        format!("{}{}", comment_block(&pairs), self.to_table())
    }
}

/// Evaluates the tuning rules on `grid`:
///
/// - `R = 2κ/λ log(N+1)`;
/// - smooth: `δ_y = N^{-κ/(l+1)}`, `δ_z = N^{-κ/l}`,
///   `M = log(N+1)^{d+1} N^{κ(2+d/l)}`;
/// - Hölder: both `δ` multiplied by `√(T-t_i)` and `M` by `(T-t_i)^{-d/2}`.
///
/// `M` is rounded up and then raised to the basis dimensions when needed, so
/// that every index can be regressed.
pub fn tune_parameters(inputs: TuningInputs, grid: &TimeGrid) -> Result<TuningPlan> {
    let TuningInputs {
        n,
        kappa,
        l,
        d,
        lambda,
        regime,
        theta_grid,
    } = inputs;
    if l == 0 {
        return Err(Error::param("l", "must be at least 1 (the Z basis has degree l - 1)"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::param("kappa", "must be positive"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    if !(theta_grid > 0.0 && theta_grid <= 1.0) {
        return Err(Error::param("theta_grid", "must lie in (0, 1]"));
    }
    if grid.len() != n {
        return Err(Error::param("N", format!("grid has {} steps, expected {n}", grid.len())));
    }
    let nf = n as f64;
    let lf = l as f64;
    let df = d as f64;
    let log_n = (nf + 1.0).ln();
    let radius = 2.0 * kappa / lambda * log_n;
    let base_m = log_n.powf(df + 1.0) * nf.powf(kappa * (2.0 + df / lf));
    let dy = nf.powf(-kappa / (lf + 1.0));
    let dz = nf.powf(-kappa / lf);

    let rows = (0..n)
        .map(|i| {
            let tau = grid.time_to_horizon(i);
            let (delta_y, delta_z, m_real) = match regime {
                Regime::Smooth => (dy, dz, base_m),
                Regime::Holder => (tau.sqrt() * dy, tau.sqrt() * dz, base_m * tau.powf(-df / 2.0)),
            };
            if !m_real.is_finite() || m_real > u64::MAX as f64 {
                return Err(Error::param("M", format!("cloud size overflows at index {i}")));
            }
            let m_formula = m_real.ceil() as u64;
            let k_y = LocalPolynomialBasis::new(l, delta_y, radius, d)?.dimension();
            let k_z = LocalPolynomialBasis::new(l - 1, delta_z, radius, d)?.dimension();
            Ok(TuningRow {
                index: i,
                t: grid.t(i),
                delta_y,
                delta_z,
                m_formula,
                k_y,
                k_z,
                m: m_formula.max(k_y as u64).max(k_z as u64),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let spatial = 2.0 + df / lf;
    let rate_exponent = match regime {
        Regime::Smooth => 1.0 / (spatial + 2.0 / kappa),
        Regime::Holder => 1.0 / (spatial + (1.0 + (df / (2.0 * theta_grid)).max(1.0)) / kappa),
    };
    Ok(TuningPlan {
        inputs,
        radius,
        rows,
        rate_exponent,
    })
}
