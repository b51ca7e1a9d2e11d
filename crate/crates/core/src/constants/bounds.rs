//! Per-index bounds: almost-sure bounds of the solution, bounds of the
//! regression responses, dependence errors and the global error bound.

use super::{apriori_constants, b_const, c_gamma, AprioriConstants, ProblemConstants};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::report::{Cell, Table};

fn check_grid(pc: &ProblemConstants, grid: &TimeGrid) -> Result<()> {
    pc.validate()?;
    let t = grid.horizon();
    if (t - pc.horizon).abs() > 1e-12 * t.max(1.0) {
        return Err(Error::param(
            "T",
            format!("constants use T = {} but the grid ends at {t}", pc.horizon),
        ));
    }
    Ok(())
}

/// `coef * data`, with zero data giving zero even when `coef` overflowed.
pub(crate) fn scaled(coef: f64, data: f64) -> f64 {
    if data == 0.0 {
        0.0
    } else {
        coef * data
    }
}

/// Bound on `sup_ω |ξ - E_i ξ|_{2,i}`.
pub(crate) fn oscillation(pc: &ProblemConstants, tau: f64) -> f64 {
    let crude = 2.0 * pc.c_xi;
    match pc.smoothness {
        Some(s) => (s.c_phi * tau.powf(s.theta_phi / 2.0)).min(crude),
        None => crude,
    }
}

/// Almost-sure bounds `(C_y[i])_{i=0..=N}` and `(C_z[i])_{i=0..N}` of the
/// discrete solution. `C_z` bounds each component of `Z_i`.
pub fn as_bounds(pc: &ProblemConstants, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(pc, grid)?;
    let a = apriori_constants(pc)?;
    as_bounds_with(pc, grid, &a)
}

fn as_bounds_with(
    pc: &ProblemConstants,
    grid: &TimeGrid,
    a: &AprioriConstants,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.len();
    let b_c1 = b_const(pc.theta_c, 1.0, pc.r_pi)?;
    let b_ch = b_const(pc.theta_c, 0.5, pc.r_pi)?;
    let c_y = (0..=n)
        .map(|i| {
            let tau = grid.time_to_horizon(i);
            scaled(a.a1y, pc.c_xi) + scaled(a.a2y * b_c1 * tau.powf(pc.theta_c), pc.c_f)
        })
        .collect();
    let c_z = (0..n)
        .map(|i| {
            let tau = grid.time_to_horizon(i);
            scaled(a.a1z / tau.sqrt(), oscillation(pc, tau))
                + scaled(a.a2z * b_ch * tau.powf(pc.theta_c - 0.5), pc.c_f)
                + scaled(a.a3z * tau.powf(pc.theta_l / 2.0), pc.c_xi)
        })
        .collect();
    Ok((c_y, c_z))
}

/// Coefficients of the response bounds
/// `Θ_y = c1 C_ξ + c2 C_f τ^{θ_C}` and `Θ_z = c3 C_ξ τ^{-1/2} + c4 C_f τ^{θ_C-1/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationBounds {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

impl ObservationBounds {
    /// Each response is bounded by `C_ξ` (times the weight moment for `Z`) plus
    /// the step-weighted sum of the driver bound
    /// `C_f τ_k^{θ_C-1} + L_f (C_y[k+1] + √q C_z[k]) τ_k^{-(1-θ_L)/2}`,
    /// with the almost-sure bounds substituted and every sum closed with the
    /// grid-independent step-sum constants.
    pub fn new(pc: &ProblemConstants, a: &AprioriConstants) -> Result<Self> {
        let r = pc.r_pi;
        let b = |x: f64, y: f64| b_const(x, y, r);
        let t = pc.horizon;
        let (tl, tc, l) = (pc.theta_l, pc.theta_c, pc.l_f);
        let sq = (pc.q as f64).sqrt();
        let y_exp = (1.0 + tl) / 2.0;
        let t_y = t.powf(y_exp);
        let t_hl = t.powf(tl / 2.0);
        let t_l3 = t.powf(tl + 0.5);

        let c1 = 1.0
            + scaled(
                a.a1y * b(y_exp, 1.0)? * t_y
                    + 2.0 * sq * a.a1z * b(tl / 2.0, 1.0)? * t_hl
                    + sq * a.a3z * b(tl + 0.5, 1.0)? * t_l3,
                l,
            );
        let c2 = b(tc, 1.0)?
            + scaled(
                a.a2y * b(tc, 1.0)? * b(tc + y_exp, 1.0)? * t_y
                    + sq * a.a2z * b(tc, 0.5)? * b(tc + tl / 2.0, 1.0)? * t_hl,
                l,
            );
        let c3 = scaled(
            1.0 + scaled(
                a.a1y * b(y_exp, 0.5)? * t_y
                    + 2.0 * sq * a.a1z * b(tl / 2.0, 0.5)? * t_hl
                    + sq * a.a3z * b(tl + 0.5, 0.5)? * t_l3,
                l,
            ),
            pc.c_m,
        );
        let c4 = scaled(
            b(tc, 0.5)?
                + scaled(
                    a.a2y * b(tc, 1.0)? * b(tc + y_exp, 0.5)? * t_y
                        + sq * a.a2z * b(tc, 0.5)? * b(tc + tl / 2.0, 0.5)? * t_hl,
                    l,
                ),
            pc.c_m,
        );
        Ok(Self { c1, c2, c3, c4 })
    }
}

/// Bounds `(Θ_y[i], Θ_z[i])_{i=0..N}` of the conditional L² norms of the
/// regression responses at each index.
pub fn obs_bounds(pc: &ProblemConstants, grid: &TimeGrid) -> Result<(Vec<f64>, Vec<f64>)> {
    check_grid(pc, grid)?;
    let a = apriori_constants(pc)?;
    let ob = ObservationBounds::new(pc, &a)?;
    Ok(obs_bounds_with(pc, grid, &ob))
}

fn obs_bounds_with(
    pc: &ProblemConstants,
    grid: &TimeGrid,
    ob: &ObservationBounds,
) -> (Vec<f64>, Vec<f64>) {
    (0..grid.len())
        .map(|i| {
            let tau = grid.time_to_horizon(i);
            let y = scaled(ob.c1, pc.c_xi) + scaled(ob.c2 * tau.powf(pc.theta_c), pc.c_f);
            let z = scaled(ob.c3 / tau.sqrt(), pc.c_xi)
                + scaled(ob.c4 * tau.powf(pc.theta_c - 0.5), pc.c_f);
            (y, z)
        })
        .unzip()
}

/// Interdependence error `C √(2028 (K+1) q' log(3M) / M)`, with `q' = q` for
/// the `Z` regression and `q' = 1` for `Y`.
pub fn dep_errors(c_bound: f64, k: usize, m: usize, q: usize, z: bool) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("M", "must be at least 1"));
    }
    if !(c_bound >= 0.0) {
        return Err(Error::param("C", "must be >= 0"));
    }
    let qf = if z { q as f64 } else { 1.0 };
    let mf = m as f64;
    Ok(scaled(c_bound, 1.0) * (2028.0 * (k as f64 + 1.0) * qf * (3.0 * mf).ln() / mf).sqrt())
}

/// Per-index inputs of the global error bound, for `k = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalErrorInputs {
    /// Best-approximation error of the `Y` regression.
    pub app_y: Vec<f64>,
    /// Best-approximation error of the `Z` regression.
    pub app_z: Vec<f64>,
    pub k_y: Vec<usize>,
    pub k_z: Vec<usize>,
    pub m: Vec<usize>,
}

impl LocalErrorInputs {
    fn check(&self, n: usize) -> Result<()> {
        let lens = [
            self.app_y.len(),
            self.app_z.len(),
            self.k_y.len(),
            self.k_z.len(),
            self.m.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(Error::param(
                "per_index",
                format!("all per-index inputs need length {n}, got {lens:?}"),
            ));
        }
        if self
            .app_y
            .iter()
            .chain(&self.app_z)
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::param("E_app", "must be finite and >= 0"));
        }
        if let Some(i) = self.m.iter().position(|&m| m == 0) {
            return Err(Error::param("M", format!("zero sample count at index {i}")));
        }
        Ok(())
    }
}

/// Right-hand sides of the global error estimate, with intermediate terms.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalErrorBound {
    pub bound_y: Vec<f64>,
    pub bound_z: Vec<f64>,
    /// Local error `E(k)` feeding the time sums.
    pub local: Vec<f64>,
    pub dep_y: Vec<f64>,
    pub dep_z: Vec<f64>,
    pub am_y: f64,
    pub am_z: f64,
}

/// Constants `(A^M_y, A^M_z)` of the global error estimate.
pub fn global_constants(pc: &ProblemConstants) -> Result<(f64, f64)> {
    let t = pc.horizon;
    let sqrt_t = t.sqrt();
    let half_l = pc.theta_l / 2.0;
    let c_u = pc.l_f * (2f64.sqrt() * pc.c_m + 4.0 * sqrt_t);
    let c1 = c_gamma(c_u, t, 0.0, half_l, 1.0, pc.r_pi)?;
    let c_half = c_gamma(c_u, t, 0.0, half_l, 0.5, pc.r_pi)?;
    let inner = pc.c_m + 2.0 * sqrt_t;
    let am_y = 2.0
        + scaled(
            4.0 * c1 * (1.0 + b_const(half_l, 1.0, pc.r_pi)? * t.powf(half_l) * inner),
            pc.l_f,
        );
    let am_z = pc.c_m
        + scaled(
            2f64.sqrt() * c_half * (1.0 + b_const(half_l, 0.5, pc.r_pi)? * t.powf(half_l) * inner),
            pc.c_m * pc.l_f,
        );
    Ok((am_y, am_z))
}

/// Evaluates the global bounds on the empirical errors of `y_k` and `z_k`.
pub fn global_error_bound(
    pc: &ProblemConstants,
    grid: &TimeGrid,
    per_index: &LocalErrorInputs,
) -> Result<GlobalErrorBound> {
    check_grid(pc, grid)?;
    let a = apriori_constants(pc)?;
    let (c_y, c_z) = as_bounds_with(pc, grid, &a)?;
    let ob = ObservationBounds::new(pc, &a)?;
    let (theta_y, theta_z) = obs_bounds_with(pc, grid, &ob);
    global_error_bound_with(pc, grid, per_index, &c_y, &c_z, &theta_y, &theta_z)
}

fn global_error_bound_with(
    pc: &ProblemConstants,
    grid: &TimeGrid,
    inp: &LocalErrorInputs,
    c_y: &[f64],
    c_z: &[f64],
    theta_y: &[f64],
    theta_z: &[f64],
) -> Result<GlobalErrorBound> {
    let n = grid.len();
    inp.check(n)?;
    let (am_y, am_z) = global_constants(pc)?;
    let stat = |theta: f64, k: usize, m: usize| scaled(theta, (k as f64 / m as f64).sqrt());

    let dep_y = (0..n)
        .map(|k| dep_errors(c_y[k], inp.k_y[k], inp.m[k], pc.q, false))
        .collect::<Result<Vec<_>>>()?;
    let dep_z = (0..n)
        .map(|k| dep_errors(c_z[k], inp.k_z[k], inp.m[k], pc.q, true))
        .collect::<Result<Vec<_>>>()?;

    // Terms indexed by N vanish: the terminal function is known exactly.
    let local: Vec<f64> = (0..n)
        .map(|k| {
            let next_y = if k + 1 < n {
                inp.app_y[k + 1]
                    + stat(theta_y[k + 1], inp.k_y[k + 1], inp.m[k + 1])
                    + scaled(dep_y[k + 1], pc.l_f)
            } else {
                0.0
            };
            next_y
                + inp.app_z[k]
                + stat(theta_z[k], inp.k_z[k], inp.m[k])
                + scaled(dep_z[k], pc.l_f)
        })
        .collect();

    let decay = |j: usize| grid.time_to_horizon(j).powf((1.0 - pc.theta_l) / 2.0);
    let mut bound_y = Vec::with_capacity(n);
    let mut bound_z = Vec::with_capacity(n);
    for k in 0..n {
        let tk = grid.t(k);
        let sum_y: f64 = (k..n).map(|j| local[j] * grid.step(j) / decay(j)).sum();
        let sum_z: f64 = (k + 1..n)
            .map(|j| local[j] * grid.step(j) / (decay(j) * (grid.t(j) - tk).sqrt()))
            .sum();
        bound_y.push(inp.app_y[k] + stat(theta_y[k], inp.k_y[k], inp.m[k]) + scaled(am_y, sum_y));
        bound_z.push(inp.app_z[k] + stat(theta_z[k], inp.k_z[k], inp.m[k]) + scaled(am_z, sum_z));
    }
    Ok(GlobalErrorBound {
        bound_y,
        bound_z,
        local,
        dep_y,
        dep_z,
        am_y,
        am_z,
    })
}

/// Every per-index constant for one problem and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    pub points: Vec<f64>,
    pub apriori: AprioriConstants,
    pub observation: ObservationBounds,
    /// `C_y[i]` for `i = 0..=N`.
    pub c_y: Vec<f64>,
    /// `C_z[i]` for `i = 0..N`.
    pub c_z: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub theta_z: Vec<f64>,
    pub am_y: f64,
    pub am_z: f64,
    /// Present when per-index regression inputs were supplied.
    pub global: Option<GlobalErrorBound>,
}

impl BoundsTable {
    pub fn compute(
        pc: &ProblemConstants,
        grid: &TimeGrid,
        per_index: Option<&LocalErrorInputs>,
    ) -> Result<Self> {
        check_grid(pc, grid)?;
        let apriori = apriori_constants(pc)?;
        let (c_y, c_z) = as_bounds_with(pc, grid, &apriori)?;
        let observation = ObservationBounds::new(pc, &apriori)?;
        let (theta_y, theta_z) = obs_bounds_with(pc, grid, &observation);
        let (am_y, am_z) = global_constants(pc)?;
        let global = per_index
            .map(|inp| global_error_bound_with(pc, grid, inp, &c_y, &c_z, &theta_y, &theta_z))
            .transpose()?;
        let table = Self {
            points: grid.points().to_vec(),
            apriori,
            observation,
            c_y,
            c_z,
            theta_y,
            theta_z,
            am_y,
            am_z,
            global,
        };
        if let Some(bad) = table.first_invalid() {
            return Err(Error::NonFiniteTerm { index: bad, term: 0 });
        }
        Ok(table)
    }

    // Overflow to +inf is tolerated (it only disables truncation); NaN is not.
    fn first_invalid(&self) -> Option<usize> {
        let ok = |v: f64| v >= 0.0;
        (0..self.c_z.len()).find(|&i| {
            !(ok(self.c_y[i]) && ok(self.c_z[i]) && ok(self.theta_y[i]) && ok(self.theta_z[i]))
        })
    }

    /// Columns `index, t_i, C_y, C_z, Theta_y, Theta_z` for `i = 0..N`.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["index", "t_i", "C_y", "C_z", "Theta_y", "Theta_z"]);
        for i in 0..self.c_z.len() {
            t.push(vec![
                Cell::from(i),
                self.points[i].into(),
                self.c_y[i].into(),
                self.c_z[i].into(),
                self.theta_y[i].into(),
                self.theta_z[i].into(),
            ]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TerminalSmoothness;

    fn pc(grid: &TimeGrid) -> ProblemConstants {
        ProblemConstants::for_grid(grid, 0.1, 0.4, 0.8, 0.6, 1.0, 1.5, None, 1).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_bounds() {
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let mut p = pc(&g);
        p.c_xi = 0.0;
        p.c_f = 0.0;
        let (cy, cz) = as_bounds(&p, &g).unwrap();
        assert!(cy.iter().chain(&cz).all(|&v| v == 0.0));
        let (ty, tz) = obs_bounds(&p, &g).unwrap();
        assert!(ty.iter().chain(&tz).all(|&v| v == 0.0));
    }

    #[test]
    fn response_bound_shape_without_driver_bias() {
        let g = TimeGrid::uniform(2.0, 10).unwrap();
        let mut p = pc(&g);
        p.c_f = 0.0;
        let (ty, tz) = obs_bounds(&p, &g).unwrap();
        for i in 1..10 {
            assert_eq!(ty[i], ty[0]);
            let scaled = tz[i] * g.time_to_horizon(i).sqrt();
            let scaled0 = tz[0] * g.time_to_horizon(0).sqrt();
            assert!((scaled - scaled0).abs() <= 1e-12 * scaled0);
        }
    }

    #[test]
    fn dependence_error_value() {
        let v = dep_errors(1.0, 1, 300, 1, false).unwrap();
        assert!((v - (2028.0 * 2.0 * 900f64.ln() / 300.0).sqrt()).abs() < 1e-12);
        assert_eq!(dep_errors(0.0, 5, 10, 3, true).unwrap(), 0.0);
        let vz = dep_errors(1.0, 1, 300, 4, true).unwrap();
        assert!((vz - 2.0 * v).abs() < 1e-12);
        assert!(dep_errors(1.0, 1, 0, 1, false).is_err());
    }

    #[test]
    fn smoothness_improves_z_bound() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let crude = pc(&g);
        let mut fine = crude.clone();
        fine.smoothness = Some(TerminalSmoothness {
            c_phi: 1.0,
            theta_phi: 1.0,
        });
        let (_, z_crude) = as_bounds(&crude, &g).unwrap();
        let (_, z_fine) = as_bounds(&fine, &g).unwrap();
        for i in 0..16 {
            assert!(z_fine[i] <= z_crude[i]);
        }
        // With θ_Φ = 1 the oscillation term no longer blows up near T.
        let last = z_fine[15] * g.time_to_horizon(15).sqrt();
        assert!(last < z_crude[15] * g.time_to_horizon(15).sqrt());
    }

    #[test]
    fn global_bound_with_constant_local_error() {
        // θ_L = 1: the time weights are 1, so the Y sum is A^M_y E (T - t_k).
        let g = TimeGrid::uniform(1.0, 5).unwrap();
        let mut p = ProblemConstants::for_grid(&g, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, None, 1).unwrap();
        p.c_xi = 0.0;
        let inp = LocalErrorInputs {
            app_y: vec![0.0; 5],
            app_z: vec![0.1; 5],
            k_y: vec![3; 5],
            k_z: vec![3; 5],
            m: vec![100; 5],
        };
        let gb = global_error_bound(&p, &g, &inp).unwrap();
        assert!(gb.local.iter().all(|&e| (e - 0.1).abs() < 1e-15));
        assert_eq!(gb.am_y, 2.0);
        assert!((gb.bound_y[0] - 2.0 * 0.1 * 1.0).abs() < 1e-14);
        assert!((gb.bound_y[2] - 2.0 * 0.1 * 0.6).abs() < 1e-14);
    }

    #[test]
    fn table_csv_columns() {
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        let t = BoundsTable::compute(&pc(&g), &g, None).unwrap().to_table();
        assert_eq!(t.header().join(","), "index,t_i,C_y,C_z,Theta_y,Theta_z");
        assert_eq!(t.rows().len(), 3);
    }

    #[test]
    fn horizon_mismatch_rejected() {
        let g = TimeGrid::uniform(1.0, 3).unwrap();
        let mut p = pc(&g);
        p.horizon = 2.0;
        assert!(as_bounds(&p, &g).is_err());
    }
}
