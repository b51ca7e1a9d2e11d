//! Discrete Gronwall inequalities with singular kernels.
//!
//! The sequences handled here satisfy, for `j = k..N`,
//!
//! ```text
//! u_j <= w_j + C_u Σ_{l=j+1}^{N-1} u_l Δ_l / ((T - t_l)^{1/2-β} (t_l - t_j)^{1/2-α})
//! ```
//!
//! Repeated substitution doubles the exponent of `(t_l - t_j)` until the kernel
//! is no longer singular; the final sum is then closed with a discrete
//! exponential estimate.

use super::b_const;
use crate::error::{Error, Result};

/// Output of the exponent-improvement iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentImprovement {
    /// Number of substitution rounds `κ`.
    pub rounds: u32,
    /// Coefficient `c_w` in front of the `w` terms.
    pub c_w: f64,
    /// Coefficient `ĉ` in front of the remaining `u` sum.
    pub c_hat: f64,
    /// Exponent `α_κ >= 1/2` reached after the last round.
    pub alpha_final: f64,
}

fn check(c_u: f64, horizon: f64, alpha: f64, beta: f64) -> Result<()> {
    if !(c_u >= 0.0 && c_u.is_finite()) {
        return Err(Error::param("C_u", format!("must be finite and >= 0, got {c_u}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::param("T", "must be positive"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::param("alpha", format!("must be >= 0, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 0.5) {
        return Err(Error::param("beta", format!("must lie in (0, 1/2], got {beta}")));
    }
    Ok(())
}

/// Turns the hypothesis into
///
/// ```text
/// u_j <= c_w w_j + c_w Σ_l w_l Δ_l / ((T-t_l)^{1/2-β} (t_l-t_j)^{1/2-α})
///        + ĉ Σ_l u_l Δ_l / (T-t_l)^{1/2-β}
/// ```
///
/// The number of rounds is `⌈log₂((1/2+β)/(α+β))⌉` (zero when `α >= 1/2`).
pub fn exponent_improvement(
    c_u: f64,
    horizon: f64,
    alpha: f64,
    beta: f64,
    r_pi: f64,
) -> Result<ExponentImprovement> {
    check(c_u, horizon, alpha, beta)?;
    let rounds = if alpha >= 0.5 {
        0
    } else {
        // The small offset keeps exact powers of two from rounding up.
        (((0.5 + beta) / (alpha + beta)).log2() - 1e-12).ceil().max(1.0) as u32
    };
    let t = horizon;
    let mut a = alpha;
    let mut c = c_u;
    let mut c_w = 1.0;
    for _ in 0..rounds {
        let b_w = b_const(alpha + beta, 0.5 + a, r_pi)?;
        let b_u = b_const(a + beta, 0.5 + a, r_pi)?;
        c_w *= 1.0 + c * (t.powf(a - alpha) + b_w * t.powf(a + beta));
        c = c * c * b_u;
        a = 2.0 * a + beta;
    }
    let a_final = a.max(0.5);
    Ok(ExponentImprovement {
        rounds,
        c_w,
        c_hat: c * t.powf(a_final - 0.5),
        alpha_final: a_final,
    })
}

/// The constant `c^γ` of the summed estimate
///
/// ```text
/// Σ_{l>j} u_l Δ_l / ((T-t_l)^{1/2-β} (t_l-t_j)^{1-γ})
///     <= c^γ Σ_{l>j} w_l Δ_l / ((T-t_l)^{1/2-β} (t_l-t_j)^{1-γ})
/// ```
///
/// built from a previously computed [`ExponentImprovement`]. The remaining
/// `u` sum is controlled through a discrete exponential estimate with
/// `ζ_T = 4 ĉ T^{(1+2β)/2} / (1+2β)` and
/// `c̄ = 2 c_w e^{ζ_T} (1 + B_{α+β,1} T^{α+β})`; the result is
/// `c̄ (1 + B_{β+α,γ} T^{α+β} + max(1, ĉ) B_{β+1/2,γ} T^{1/2+β})`.
pub fn intermediate_constant(
    imp: &ExponentImprovement,
    horizon: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    r_pi: f64,
) -> Result<f64> {
    check(0.0, horizon, alpha, beta)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param("gamma", format!("must be positive, got {gamma}")));
    }
    let t = horizon;
    let zeta = 2.0 / (1.0 + 2.0 * beta) * 2.0 * imp.c_hat * t.powf(0.5 + beta);
    let c_bar = 2.0 * imp.c_w * zeta.exp() * (1.0 + b_const(alpha + beta, 1.0, r_pi)? * t.powf(alpha + beta));
    let first = b_const(beta + alpha, gamma, r_pi)? * t.powf(alpha + beta);
    let second = imp.c_hat.max(1.0) * b_const(beta + 0.5, gamma, r_pi)? * t.powf(0.5 + beta);
    Ok(c_bar * (1.0 + first + second))
}

/// Convenience wrapper: [`exponent_improvement`] followed by
/// [`intermediate_constant`].
pub fn c_gamma(
    c_u: f64,
    horizon: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    r_pi: f64,
) -> Result<f64> {
    let imp = exponent_improvement(c_u, horizon, alpha, beta, r_pi)?;
    intermediate_constant(&imp, horizon, alpha, beta, gamma, r_pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_counts() {
        // (1/2 + β)/(α + β) = 2 exactly: a single round.
        assert_eq!(exponent_improvement(1.0, 1.0, 0.0, 0.5, 1.0).unwrap().rounds, 1);
        // ratio 4: two rounds even though 2·(1/6)+1/6 may round below 1/2.
        let imp = exponent_improvement(1.0, 1.0, 0.0, 1.0 / 6.0, 1.0).unwrap();
        assert_eq!(imp.rounds, 2);
        assert!(imp.alpha_final >= 0.5);
        // ratio 3: ⌈log₂ 3⌉ = 2.
        assert_eq!(exponent_improvement(1.0, 1.0, 0.0, 0.25, 1.0).unwrap().rounds, 2);
        assert_eq!(exponent_improvement(1.0, 1.0, 0.7, 0.25, 1.0).unwrap().rounds, 0);
    }

    #[test]
    fn no_rounds_when_kernel_is_regular() {
        let imp = exponent_improvement(2.0, 4.0, 0.75, 0.25, 1.0).unwrap();
        assert_eq!(imp.c_w, 1.0);
        assert!((imp.c_hat - 2.0 * 4.0_f64.powf(0.25)).abs() < 1e-14);
    }

    #[test]
    fn single_round_by_hand() {
        // α = 0, β = 1/2: c_w = 1 + C_u (1 + B_{1/2,1/2} T^{1/2}),
        // C_1 = C_u² B_{1/2,1/2}, α_1 = 1/2.
        let (cu, t) = (0.3, 2.0);
        let imp = exponent_improvement(cu, t, 0.0, 0.5, 1.0).unwrap();
        let b = 2.0 * std::f64::consts::PI;
        assert!((imp.c_w - (1.0 + cu * (1.0 + b * t.sqrt()))).abs() < 1e-9);
        assert!((imp.c_hat - cu * cu * b).abs() < 1e-9);
    }

    #[test]
    fn zero_feedback() {
        let c = c_gamma(0.0, 1.0, 0.0, 0.5, 1.0, 1.0).unwrap();
        // c_w = 1 and ĉ = 0, so c̄ = 2 (1 + B_{1/2,1}).
        let b_a1 = b_const(0.5, 1.0, 1.0).unwrap();
        let b_1 = b_const(1.0, 1.0, 1.0).unwrap();
        let expected = 2.0 * (1.0 + b_a1) * (1.0 + b_a1 + b_1);
        assert!((c - expected).abs() < 1e-12, "{c} vs {expected}");
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(c_gamma(-1.0, 1.0, 0.0, 0.5, 1.0, 1.0).is_err());
        assert!(c_gamma(1.0, 1.0, 0.0, 0.6, 1.0, 1.0).is_err());
        assert!(c_gamma(1.0, 1.0, 0.0, 0.0, 1.0, 1.0).is_err());
        assert!(c_gamma(1.0, 0.0, 0.0, 0.5, 1.0, 1.0).is_err());
        assert!(c_gamma(1.0, 1.0, 0.0, 0.5, 0.0, 1.0).is_err());
    }
}
