//! Explicit constants of the stability and error analysis.
//!
//! Everything here is a pure function of a [`ProblemConstants`] record (and,
//! for the per-index arrays, a [`TimeGrid`]). The chain is
//!
//! ```text
//! b_const ──► gronwall (c_w, ĉ, c^γ) ──► apriori (A¹_y … A³_z)
//!                                          │
//!                           as_bounds (C_y,i, C_z,i) ──► obs_bounds (Θ_y,i, Θ_z,i)
//!                                                           │
//!                                  dep_errors ──► global_error_bound
//! ```

mod bounds;
mod gronwall;

pub use bounds::{
    as_bounds, dep_errors, global_constants, global_error_bound, obs_bounds, BoundsTable,
    GlobalErrorBound,
    LocalErrorInputs, ObservationBounds,
};
use bounds::scaled;
pub use gronwall::{c_gamma, exponent_improvement, intermediate_constant, ExponentImprovement};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::quadrature;

/// Fractional smoothness of the terminal condition:
/// `|ξ - E_i ξ|_{2,i} <= c_phi (T - t_i)^{theta_phi / 2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalSmoothness {
    pub c_phi: f64,
    pub theta_phi: f64,
}

/// Scalar data of a problem that the explicit constants depend on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConstants {
    /// Lipschitz scale `L_f` of the driver.
    pub l_f: f64,
    /// Bound `C_f` of the driver at the origin.
    pub c_f: f64,
    /// Singularity exponent of the Lipschitz constant, in `(0, 1]`.
    pub theta_l: f64,
    /// Singularity exponent of the origin bound, in `(0, 1]`.
    pub theta_c: f64,
    /// Moment constant `C_M` of the Malliavin weights.
    pub c_m: f64,
    /// Almost-sure bound `C_ξ` of the terminal value.
    pub c_xi: f64,
    pub smoothness: Option<TerminalSmoothness>,
    pub horizon: f64,
    pub r_pi: f64,
    /// Dimension of the weights (and of `Z`).
    pub q: usize,
}

impl ProblemConstants {
    /// Constants with the horizon and ratio taken from `grid`. The ratio is
    /// floored at 1, the value shared by all grids with non-increasing steps.
    #[allow(clippy::too_many_arguments)]
    pub fn for_grid(
        grid: &TimeGrid,
        l_f: f64,
        c_f: f64,
        theta_l: f64,
        theta_c: f64,
        c_m: f64,
        c_xi: f64,
        smoothness: Option<TerminalSmoothness>,
        q: usize,
    ) -> Result<Self> {
        let pc = Self {
            l_f,
            c_f,
            theta_l,
            theta_c,
            c_m,
            c_xi,
            smoothness,
            horizon: grid.horizon(),
            r_pi: grid.r_pi().max(1.0),
            q,
        };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("L_f", self.l_f),
            ("C_f", self.c_f),
            ("C_M", self.c_m),
            ("C_xi", self.c_xi),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        for (name, v) in [("theta_L", self.theta_l), ("theta_C", self.theta_c)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::param(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        if let Some(s) = self.smoothness {
            if !(s.c_phi >= 0.0 && s.c_phi.is_finite()) {
                return Err(Error::param("C_Phi", "must be finite and >= 0"));
            }
            if !(0.0..=1.0).contains(&s.theta_phi) {
                return Err(Error::param("theta_Phi", "must lie in [0, 1]"));
            }
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("T", "must be positive"));
        }
        if !(self.r_pi > 0.0 && self.r_pi.is_finite()) {
            return Err(Error::param("R_pi", "must be positive"));
        }
        if self.q == 0 {
            return Err(Error::param("q", "must be at least 1"));
        }
        Ok(())
    }
}

/// `∫_0^1 (1-s)^{a-1} s^{b-1} ds`, the Euler beta function, by adaptive
/// quadrature. Each half of the interval is integrated after the substitution
/// `v = s^p` whenever the exponent `p` at the nearby endpoint is below one,
/// which removes the integrable singularity.
pub fn beta_integral(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::param("alpha/beta", "exponents must be positive"));
    }
    Ok(half_beta(b, a) + half_beta(a, b))
}

// ∫_0^{1/2} s^{p-1} (1-s)^{r-1} ds
fn half_beta(p: f64, r: f64) -> f64 {
    const REL: f64 = 1e-14;
    if p < 1.0 {
        let upper = 0.5_f64.powf(p);
        let inv = 1.0 / p;
        quadrature::integrate(|v| (1.0 - v.powf(inv)).powf(r - 1.0), 0.0, upper, 0.0, REL).value
            / p
    } else {
        quadrature::integrate(
            |s| s.powf(p - 1.0) * (1.0 - s).powf(r - 1.0),
            0.0,
            0.5,
            0.0,
            REL,
        )
        .value
    }
}

/// The grid-independent constant `B_{α,β}` bounding the singular weighted
/// step sums of [`TimeGrid::single_weighted_sum`] (with `β = 1`) and
/// [`TimeGrid::double_weighted_sum`]:
///
/// * `1` when `α >= 1` and `β >= 1`,
/// * `1/α` when `β = 1` and `α < 1` (Riemann-sum comparison),
/// * `(1 + R_π) B(α, β)` otherwise.
pub fn b_const(alpha: f64, beta: f64, r_pi: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::param(
            "alpha/beta",
            format!("exponents must be positive, got ({alpha}, {beta})"),
        ));
    }
    if !(r_pi > 0.0 && r_pi.is_finite()) {
        return Err(Error::param("R_pi", format!("must be positive, got {r_pi}")));
    }
    if alpha >= 1.0 && beta >= 1.0 {
        Ok(1.0)
    } else if beta == 1.0 {
        Ok(1.0 / alpha)
    } else {
        Ok((1.0 + r_pi) * beta_integral(alpha, beta)?)
    }
}

/// The five constants of the a priori stability estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriConstants {
    pub a1y: f64,
    pub a2y: f64,
    pub a1z: f64,
    pub a2z: f64,
    pub a3z: f64,
}

/// Evaluates `A^{(1)}_y, A^{(2)}_y, A^{(1)}_z, A^{(2)}_z, A^{(3)}_z`, using the
/// Gronwall constants with `α = 0`, `β = θ_L/2` and `C_u = L_f (C_M + √T)`.
pub fn apriori_constants(pc: &ProblemConstants) -> Result<AprioriConstants> {
    pc.validate()?;
    let t = pc.horizon;
    let sqrt_t = t.sqrt();
    let half_l = pc.theta_l / 2.0;
    let c_u = pc.l_f * (pc.c_m + sqrt_t);
    let imp = exponent_improvement(c_u, t, 0.0, half_l, pc.r_pi)?;
    let c1 = intermediate_constant(&imp, t, 0.0, half_l, 1.0, pc.r_pi)?;
    let c_half = intermediate_constant(&imp, t, 0.0, half_l, 0.5, pc.r_pi)?;
    let t_half_l = t.powf(half_l);
    let b_l1 = b_const(half_l, 1.0, pc.r_pi)?;
    let b_l1_shift = b_const(0.5 + half_l, 1.0, pc.r_pi)?;
    let b_lh = b_const(half_l, 0.5, pc.r_pi)?;
    let b_lh_shift = b_const(0.5 + half_l, 0.5, pc.r_pi)?;
    let l = pc.l_f;
    let cm = pc.c_m;
    Ok(AprioriConstants {
        a1y: 1.0 + scaled(c1 * (cm * b_l1 + b_l1_shift * sqrt_t) * t_half_l, l),
        a2y: 1.0 + scaled(c1 * (cm + sqrt_t) * b_l1 * t_half_l, l),
        a1z: scaled(1.0 + scaled(c_half * b_lh * t_half_l, l * cm), cm),
        a2z: scaled(1.0 + scaled(c_half * (cm + sqrt_t) * b_lh * t_half_l, l), cm),
        a3z: scaled(c_half * b_lh_shift, cm * l),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(l_f: f64, c_m: f64, theta_l: f64) -> ProblemConstants {
        ProblemConstants {
            l_f,
            c_f: 0.3,
            theta_l,
            theta_c: 1.0,
            c_m,
            c_xi: 1.0,
            smoothness: None,
            horizon: 1.0,
            r_pi: 1.0,
            q: 1,
        }
    }

    #[test]
    fn b_const_regimes() {
        assert_eq!(b_const(2.0, 3.0, 1.0).unwrap(), 1.0);
        assert_eq!(b_const(0.5, 1.0, 1.0).unwrap(), 2.0);
        let b = b_const(0.5, 0.5, 1.0).unwrap();
        assert!((b - 2.0 * std::f64::consts::PI).abs() < 1e-9, "{b}");
        assert!(b_const(0.0, 1.0, 1.0).is_err());
        assert!(b_const(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn beta_integral_known_values() {
        // B(1,1) = 1, B(2,3) = 1/12, B(1/2,1/2) = π
        assert!((beta_integral(1.0, 1.0).unwrap() - 1.0).abs() < 1e-13);
        assert!((beta_integral(2.0, 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-13);
        assert!((beta_integral(0.5, 0.5).unwrap() - std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn apriori_without_feedback() {
        let a = apriori_constants(&pc(0.0, 1.7, 0.6)).unwrap();
        assert_eq!(a.a1y, 1.0);
        assert_eq!(a.a2y, 1.0);
        assert_eq!(a.a1z, 1.7);
        assert_eq!(a.a2z, 1.7);
        assert_eq!(a.a3z, 0.0);
    }

    #[test]
    fn apriori_without_weights() {
        let a = apriori_constants(&pc(0.8, 0.0, 1.0)).unwrap();
        assert_eq!(a.a1z, 0.0);
        assert_eq!(a.a2z, 0.0);
        assert_eq!(a.a3z, 0.0);
        assert!(a.a1y > 1.0);
    }

    #[test]
    fn validation_rejects_bad_exponents() {
        let mut p = pc(1.0, 1.0, 1.0);
        p.theta_l = 0.0;
        assert!(apriori_constants(&p).is_err());
        let mut p = pc(1.0, 1.0, 1.0);
        p.c_xi = -1.0;
        assert!(p.validate().is_err());
    }
}
