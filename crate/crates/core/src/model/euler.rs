use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::{check_dim, normals, MarkovModel};
use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Coefficients of `dX = b(t, X) dt + σ(t, X) dW` with a square diffusion
/// matrix, together with their space derivatives.
pub trait SdeCoefficients: Send + Sync {
    fn dim(&self) -> usize;
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64]) -> DMatrix<f64>;
    /// `∂b_a / ∂x_c`.
    fn drift_jacobian(&self, t: f64, x: &[f64]) -> DMatrix<f64>;
    /// Jacobian of column `l` of the diffusion matrix, `∂σ_{a l} / ∂x_c`.
    fn diffusion_jacobian(&self, t: f64, x: &[f64], l: usize) -> DMatrix<f64>;
}

/// Euler scheme for the state and for its tangent process, with weights
///
/// ```text
/// H^{(i)}_j = 1/(t_j - t_i) Σ_{k=i}^{j-1} (σ⁻¹(X_k) J_k σ(X_i))ᵀ ΔW_k
/// ```
///
/// where `J` is the discrete tangent process restarted at the identity at
/// `t_i`. The integrand is evaluated at the left point of each step, so every
/// weight has exactly zero conditional mean.
#[derive(Debug, Clone)]
pub struct EulerSde<C> {
    coeffs: C,
    moment_constant: f64,
}

impl<C: SdeCoefficients> EulerSde<C> {
    /// `moment_constant` is the user-declared `C_M` of the resulting weights.
    pub fn new(coeffs: C, moment_constant: f64) -> Result<Self> {
        check_dim(coeffs.dim())?;
        if !(moment_constant >= 0.0 && moment_constant.is_finite()) {
            return Err(Error::param("C_M", "must be finite and >= 0"));
        }
        Ok(Self {
            coeffs,
            moment_constant,
        })
    }

    pub fn coefficients(&self) -> &C {
        &self.coeffs
    }
}

impl<C: SdeCoefficients> MarkovModel for EulerSde<C> {
    fn dim(&self) -> usize {
        self.coeffs.dim()
    }

    fn weight_dim(&self) -> usize {
        self.coeffs.dim()
    }

    fn moment_constant(&self) -> f64 {
        self.moment_constant
    }

    fn transition(&self, grid: &TimeGrid, k: usize, x: &[f64], dw: &[f64], out: &mut [f64]) {
        let d = x.len();
        let t = grid.t(k);
        let dt = grid.step(k);
        self.coeffs.drift(t, x, out);
        let s = self.coeffs.diffusion(t, x);
        for a in 0..d {
            let mut v = x[a] + out[a] * dt;
            for l in 0..d {
                v += s[(a, l)] * dw[l];
            }
            out[a] = v;
        }
    }

    fn sample_row(
        &self,
        grid: &TimeGrid,
        start: usize,
        x0: &[f64],
        path: usize,
        rng: &mut ChaCha8Rng,
        x: &mut [f64],
        h: &mut [f64],
    ) -> Result<()> {
        let d = self.dim();
        let n = grid.len();
        let mut cur = x0.to_vec();
        let mut next = vec![0.0; d];
        let mut dw = vec![0.0; d];
        for k in 0..start {
            normals(rng, grid.step(k).sqrt(), &mut dw);
            self.transition(grid, k, &cur, &dw, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        x[..d].copy_from_slice(&cur);
        let ti = grid.t(start);
        let sigma_start = self.coeffs.diffusion(ti, &cur);
        let mut tangent = DMatrix::<f64>::identity(d, d);
        let mut acc = DVector::<f64>::zeros(d);
        for k in start..n {
            normals(rng, grid.step(k).sqrt(), &mut dw);
            let t = grid.t(k);
            let s = self.coeffs.diffusion(t, &cur);
            let inv = s
                .try_inverse()
                .filter(|m| m.iter().all(|v| v.is_finite()))
                .ok_or(Error::SingularDiffusion { index: k, path })?;
            let integrand = inv * &tangent * &sigma_start;
            let dw_vec = DVector::from_column_slice(&dw);
            acc += integrand.transpose() * &dw_vec;

            let mut step = &tangent + self.coeffs.drift_jacobian(t, &cur) * &tangent * grid.step(k);
            for (l, &inc) in dw.iter().enumerate() {
                step += self.coeffs.diffusion_jacobian(t, &cur, l) * &tangent * inc;
            }
            tangent = step;

            self.transition(grid, k, &cur, &dw, &mut next);
            std::mem::swap(&mut cur, &mut next);
            let r = k - start;
            x[(r + 1) * d..(r + 2) * d].copy_from_slice(&cur);
            let span = grid.t(k + 1) - ti;
            for c in 0..d {
                h[r * d + c] = acc[c] / span;
            }
        }
        Ok(())
    }
}

/// `dX = -a X dt + s dW` in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct OrnsteinUhlenbeck {
    pub rate: f64,
    pub vol: f64,
    pub dim: usize,
}

impl OrnsteinUhlenbeck {
    /// Euler model with `C_M = √d`, valid whenever `0 <= a Δ_k <= 2` on the
    /// grid, since the tangent process then never grows.
    pub fn model(rate: f64, vol: f64, dim: usize) -> Result<EulerSde<Self>> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::param("rate", "must be finite and >= 0"));
        }
        if !(vol != 0.0 && vol.is_finite()) {
            return Err(Error::param("vol", "must be finite and nonzero"));
        }
        EulerSde::new(Self { rate, vol, dim }, (dim as f64).sqrt())
    }
}

impl SdeCoefficients for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(x) {
            *o = -self.rate * v;
        }
    }

    fn diffusion(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.vol
    }

    fn drift_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * -self.rate
    }

    fn diffusion_jacobian(&self, _t: f64, _x: &[f64], _l: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
}

/// The scalar linear equation `dX = a X dW`. Its tangent process is
/// `X_r / X_t`, so the weights coincide with the Brownian ones.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeNoise {
    pub a: f64,
}

impl MultiplicativeNoise {
    pub fn model(a: f64) -> Result<EulerSde<Self>> {
        if !(a != 0.0 && a.is_finite()) {
            return Err(Error::param("a", "must be finite and nonzero"));
        }
        EulerSde::new(Self { a }, 1.0)
    }
}

impl SdeCoefficients for MultiplicativeNoise {
    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn diffusion(&self, _t: f64, x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.a * x[0])
    }

    fn drift_jacobian(&self, _t: f64, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(1, 1)
    }

    fn diffusion_jacobian(&self, _t: f64, _x: &[f64], _l: usize) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.a)
    }
}
