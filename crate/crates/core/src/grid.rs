//! Time grids `0 = t_0 < t_1 < ... < t_N = T` and the singular weighted step
//! sums that drive every Gronwall-type estimate in [`crate::constants`].

use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};

/// A partition of `[0, T]`.
///
/// Steps `Δ_i = t_{i+1} - t_i` and the maximal consecutive step ratio are
/// computed once at construction, so every consumer sees bit-identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
    steps: Vec<f64>,
    r_pi: f64,
}

impl TimeGrid {
    /// Builds a grid from explicit points. The first point must be `0`.
    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("need at least two points".into()));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "first point must be 0, got {}",
                points[0]
            )));
        }
        if let Some(bad) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("point {bad} is not finite")));
        }
        if let Some(w) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "points must be strictly increasing (t_{} = {} >= t_{} = {})",
                w,
                points[w],
                w + 1,
                points[w + 1]
            )));
        }
        let steps: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
        // A single step carries no ratio constraint; 1 is the neutral value.
        let r_pi = steps
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))))
            .unwrap_or(1.0);
        Ok(Self {
            points,
            steps,
            r_pi,
        })
    }

    /// Uniform grid with `n` steps on `[0, horizon]`.
    pub fn uniform(horizon: f64, n: usize) -> Result<Self> {
        Self::theta(horizon, n, 1.0)
    }

    /// The grid `t_i = T - T (1 - i/N)^{1/θ}`, which refines towards `T` when
    /// `θ < 1`. Its steps are non-increasing, so the step ratio never exceeds 1.
    pub fn theta(horizon: f64, n: usize, theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("N", "must be at least 1"));
        }
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::param("theta", format!("must lie in (0, 1], got {theta}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("T", format!("must be positive, got {horizon}")));
        }
        let nf = n as f64;
        let mut points: Vec<f64> = (0..=n)
            .map(|i| horizon - horizon * (1.0 - i as f64 / nf).powf(1.0 / theta))
            .collect();
        points[0] = 0.0;
        points[n] = horizon;
        Self::from_points(points)
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn t(&self, i: usize) -> f64 {
        self.points[i]
    }

    pub fn step(&self, i: usize) -> f64 {
        self.steps[i]
    }

    /// `T - t_i`.
    pub fn time_to_horizon(&self, i: usize) -> f64 {
        self.horizon() - self.points[i]
    }

    /// Maximal consecutive step ratio `max_i Δ_{i+1} / Δ_i`.
    pub fn r_pi(&self) -> f64 {
        self.r_pi
    }

    /// `Σ_{j=i}^{k-1} Δ_j / (t_k - t_j)^{1-α}`.
    pub fn single_weighted_sum(&self, i: usize, k: usize, alpha: f64) -> Result<f64> {
        self.check_pair(i, k)?;
        let tk = self.points[k];
        Ok((i..k)
            .map(|j| self.steps[j] * (tk - self.points[j]).powf(alpha - 1.0))
            .sum())
    }

    /// `Σ_{j=i+1}^{k-1} Δ_j / ((t_k - t_j)^{1-α} (t_j - t_i)^{1-β})`.
    pub fn double_weighted_sum(&self, i: usize, k: usize, alpha: f64, beta: f64) -> Result<f64> {
        self.check_pair(i, k)?;
        let (ti, tk) = (self.points[i], self.points[k]);
        Ok((i + 1..k)
            .map(|j| {
                let tj = self.points[j];
                self.steps[j] * (tk - tj).powf(alpha - 1.0) * (tj - ti).powf(beta - 1.0)
            })
            .sum())
    }

    /// Dispatches to the single or double weighted sum.
    pub fn weighted_step_sum(
        &self,
        i: usize,
        k: usize,
        alpha: f64,
        beta: f64,
        double: bool,
    ) -> Result<f64> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::param("alpha/beta", "exponents must be positive"));
        }
        if double {
            self.double_weighted_sum(i, k, alpha, beta)
        } else {
            self.single_weighted_sum(i, k, alpha)
        }
    }

    fn check_pair(&self, i: usize, k: usize) -> Result<()> {
        if i >= k || k > self.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                expected: format!("0 <= i < k <= {} with k = {k}", self.len()),
            });
        }
        Ok(())
    }

    /// A random grid whose consecutive step ratios are drawn uniformly in
    /// `[1/r_max, r_max]`, rescaled to `[0, horizon]`.
    pub fn random_admissible<R: Rng + ?Sized>(
        horizon: f64,
        n: usize,
        r_max: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || !(r_max >= 1.0) {
            return Err(Error::param("r_max", "need n >= 1 and r_max >= 1"));
        }
        let mut steps = Vec::with_capacity(n);
        let mut current = 1.0_f64;
        steps.push(current);
        for _ in 1..n {
            let ratio = if r_max > 1.0 {
                rng.random_range(1.0 / r_max..=r_max)
            } else {
                1.0
            };
            current *= ratio;
            steps.push(current);
        }
        let total: f64 = steps.iter().sum();
        let mut points = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        points.push(0.0);
        for s in &steps[..n - 1] {
            acc += s / total * horizon;
            points.push(acc);
        }
        points.push(horizon);
        Self::from_points(points)
    }
}

/// Comma-separated list of the grid points.
impl fmt::Display for TimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (n, t) in self.points.iter().enumerate() {
            if n > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", crate::report::fmt_f64(*t))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_grid_points() {
        let g = TimeGrid::theta(1.0, 4, 1.0).unwrap();
        assert_eq!(g.points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.r_pi(), 1.0);
    }

    #[test]
    fn theta_half_two_steps() {
        let g = TimeGrid::theta(1.0, 2, 0.5).unwrap();
        assert!((g.t(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn theta_grids_have_nonincreasing_steps() {
        for &theta in &[0.2, 0.3, 0.5, 0.77, 1.0] {
            let g = TimeGrid::theta(1.0, 64, theta).unwrap();
            assert_eq!(g.len(), 64);
            assert!(g.r_pi() <= 1.0 + 1e-12, "theta={theta} r_pi={}", g.r_pi());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(TimeGrid::theta(1.0, 0, 1.0).is_err());
        assert!(TimeGrid::theta(1.0, 4, 0.0).is_err());
        assert!(TimeGrid::theta(1.0, 4, 1.5).is_err());
        assert!(TimeGrid::from_points(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(TimeGrid::from_points(vec![0.1, 0.5]).is_err());
    }

    #[test]
    fn r_pi_is_exact_max_ratio() {
        let g = TimeGrid::from_points(vec![0.0, 0.1, 0.4, 0.5, 1.0]).unwrap();
        // ratios: 3, 1/3, 5
        assert!((g.r_pi() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn single_sum_alpha_one_telescopes() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        let s = g.single_weighted_sum(0, 10, 1.0).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        let s = g.single_weighted_sum(3, 7, 1.0).unwrap();
        assert!((s - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_sum_brute_force_uniform_four() {
        // Δ = 1/4, t_k - t_j = 1, 3/4, 1/2, 1/4
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let s = g.single_weighted_sum(0, 4, 0.5).unwrap();
        let expected: f64 = [1.0_f64, 0.75, 0.5, 0.25].iter().map(|x| 0.25 / x.sqrt()).sum();
        assert!((s - expected).abs() < 1e-14);
        assert!(s <= 2.0);
    }

    #[test]
    fn weighted_sum_rejects_bad_pair() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        assert!(g.weighted_step_sum(2, 2, 0.5, 0.5, true).is_err());
        assert!(g.weighted_step_sum(3, 1, 0.5, 0.5, false).is_err());
    }

    #[test]
    fn random_grids_respect_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let g = TimeGrid::random_admissible(2.0, 17, 1.5, &mut rng).unwrap();
            assert!(g.r_pi() <= 1.5 * (1.0 + 1e-9));
            assert_eq!(g.horizon(), 2.0);
        }
    }

    #[test]
    fn display_is_comma_separated() {
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let s = g.to_string();
        assert_eq!(s.split(',').count(), 3);
    }
}
