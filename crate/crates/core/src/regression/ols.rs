use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::LocalPolynomialBasis;
use crate::error::{Error, Result};
use crate::report::fmt_f64;

/// A fitted piecewise polynomial with `outputs` components, clamped
/// componentwise to `[-L, L]` and equal to zero outside the basis support.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolynomialEstimator {
    basis: LocalPolynomialBasis,
    outputs: usize,
    // coeffs[(cell * p + j) * outputs + o]
    coeffs: Vec<f64>,
    level: f64,
    cell_rows: Vec<usize>,
}

impl LocalPolynomialEstimator {
    /// An estimator with all coefficients zero.
    pub fn zero(basis: LocalPolynomialBasis, outputs: usize) -> Self {
        let len = basis.dimension() * outputs;
        let cells = basis.cell_count();
        Self {
            basis,
            outputs,
            coeffs: vec![0.0; len],
            level: f64::INFINITY,
            cell_rows: vec![0; cells],
        }
    }

    pub fn basis(&self) -> &LocalPolynomialBasis {
        &self.basis
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Truncation level; `+inf` when untruncated.
    pub fn level(&self) -> f64 {
        self.level
    }

    /// Number of fitting rows that fell in each cell.
    pub fn cell_rows(&self) -> &[usize] {
        &self.cell_rows
    }

    /// The same estimator clamped to `[-level, level]`. Truncating twice keeps
    /// the smaller level.
    pub fn truncated(mut self, level: f64) -> Result<Self> {
        if !(level >= 0.0) {
            return Err(Error::param("L", format!("truncation level must be >= 0, got {level}")));
        }
        self.level = self.level.min(level);
        Ok(self)
    }

    /// Raw polynomial value, before truncation.
    pub fn evaluate_raw(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.outputs);
        out.fill(0.0);
        let Some(cell) = self.basis.cell_index(x) else {
            return;
        };
        let p = self.basis.monomials_per_cell();
        let mut stack = [0.0; 32];
        let mut heap;
        let feat: &mut [f64] = if p <= stack.len() {
            &mut stack[..p]
        } else {
            heap = vec![0.0; p];
            &mut heap
        };
        self.basis.local_features(cell, x, feat);
        let block = &self.coeffs[cell * p * self.outputs..(cell + 1) * p * self.outputs];
        for (j, f) in feat.iter().enumerate() {
            for (o, v) in out.iter_mut().enumerate() {
                *v += f * block[j * self.outputs + o];
            }
        }
    }

    /// Truncated value at `x`.
    pub fn evaluate(&self, x: &[f64], out: &mut [f64]) {
        self.evaluate_raw(x, out);
        for v in out.iter_mut() {
            *v = clamp(*v, self.level);
        }
    }

    /// Convenience for scalar estimators.
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = [0.0];
        self.evaluate(x, &mut v);
        v[0]
    }

    /// Comma-separated dump with columns `cell, monomial, component,
    /// coefficient`. The monomial multi-index is written with `;` between
    /// axes.
    pub fn to_csv(&self) -> String {
        let p = self.basis.monomials_per_cell();
        let mut out = String::from("cell,monomial,component,coefficient\n");
        for cell in 0..self.basis.cell_count() {
            for (j, alpha) in self.basis.exponents().iter().enumerate() {
                let idx: Vec<String> = alpha.iter().map(|k| k.to_string()).collect();
                for o in 0..self.outputs {
                    let c = self.coeffs[(cell * p + j) * self.outputs + o];
                    let _ = writeln!(out, "{cell},{},{o},{}", idx.join(";"), fmt_f64(c));
                }
            }
        }
        out
    }
}

/// The clamp `T_L`; NaN stays NaN so that failures are not masked.
pub fn clamp(v: f64, level: f64) -> f64 {
    if v > level {
        level
    } else if v < -level {
        -level
    } else {
        v
    }
}

/// Empirical least squares on the rows `(states[m], responses[m])`, solved
/// independently in every cell with a minimal-norm SVD solve. Cells without
/// rows get zero coefficients.
///
/// `states` holds `rows * d` values and `responses` holds `rows * outputs`.
pub fn ols_fit(
    responses: &[f64],
    outputs: usize,
    basis: &LocalPolynomialBasis,
    states: &[f64],
) -> Result<LocalPolynomialEstimator> {
    let d = basis.dim();
    if outputs == 0 {
        return Err(Error::param("outputs", "must be at least 1"));
    }
    if states.len() % d != 0 || responses.len() % outputs != 0 {
        return Err(Error::param("rows", "state or response length is not a multiple of the width"));
    }
    let rows = states.len() / d;
    if responses.len() / outputs != rows {
        return Err(Error::param(
            "rows",
            format!("{rows} states but {} responses", responses.len() / outputs),
        ));
    }
    if rows == 0 {
        return Err(Error::param("M", "need at least one row"));
    }
    if let Some(bad) = responses.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResponse { row: bad / outputs });
    }

    // Counting sort of the rows by cell.
    let cells = basis.cell_count();
    let cell_of: Vec<Option<usize>> = states.par_chunks(d).map(|x| basis.cell_index(x)).collect();
    let mut counts = vec![0usize; cells];
    for c in cell_of.iter().flatten() {
        counts[*c] += 1;
    }
    let mut start = vec![0usize; cells + 1];
    for c in 0..cells {
        start[c + 1] = start[c] + counts[c];
    }
    let mut order = vec![0usize; start[cells]];
    let mut fill = start.clone();
    for (m, c) in cell_of.iter().enumerate() {
        if let Some(c) = c {
            order[fill[*c]] = m;
            fill[*c] += 1;
        }
    }

    let p = basis.monomials_per_cell();
    let mut coeffs = vec![0.0; cells * p * outputs];
    coeffs
        .par_chunks_mut(p * outputs)
        .enumerate()
        .try_for_each(|(cell, block)| -> Result<()> {
            let members = &order[start[cell]..start[cell + 1]];
            if members.is_empty() {
                return Ok(());
            }
            let n = members.len();
            let mut a = DMatrix::<f64>::zeros(n, p);
            let mut b = DMatrix::<f64>::zeros(n, outputs);
            let mut feat = vec![0.0; p];
            for (r, &m) in members.iter().enumerate() {
                basis.local_features(cell, &states[m * d..(m + 1) * d], &mut feat);
                for j in 0..p {
                    a[(r, j)] = feat[j];
                }
                for o in 0..outputs {
                    b[(r, o)] = responses[m * outputs + o];
                }
            }
            let sol = min_norm_solve(a, &b).ok_or(Error::LeastSquares { cell })?;
            for j in 0..p {
                for o in 0..outputs {
                    block[j * outputs + o] = sol[(j, o)];
                }
            }
            Ok(())
        })?;

    Ok(LocalPolynomialEstimator {
        basis: basis.clone(),
        outputs,
        coeffs,
        level: f64::INFINITY,
        cell_rows: counts,
    })
}

/// Minimal-norm least-squares solution of `a x = b`. Singular values below
/// `ε σ_max max(rows, cols)` are treated as zero.
pub fn min_norm_solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (r, c) = a.shape();
    let svd = a.try_svd(true, true, f64::EPSILON, 0)?;
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = f64::EPSILON * smax * r.max(c) as f64;
    let x = svd.solve(b, tol).ok()?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_definition() {
        assert_eq!((clamp(3.0, 2.0), clamp(-5.0, 2.0)), (2.0, -2.0));
        assert_eq!(clamp(1.5, 2.0), 1.5);
        assert!(clamp(f64::NAN, 1.0).is_nan());
    }

    #[test]
    fn reproduces_span_members() {
        let basis = LocalPolynomialBasis::new(1, 1.0, 2.0, 1).unwrap();
        let xs: Vec<f64> = (0..40).map(|k| -2.0 + 4.0 * k as f64 / 39.0).collect();
        // Piecewise linear with a kink at a cell boundary.
        let f = |x: f64| if x < 0.0 { 1.0 - 2.0 * x } else { 3.0 * x - 0.5 };
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        let est = ols_fit(&ys, 1, &basis, &xs).unwrap();
        for (&x, &y) in xs.iter().zip(&ys) {
            assert!((est.value(&[x]) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_are_reproduced_everywhere() {
        let basis = LocalPolynomialBasis::new(2, 0.5, 1.0, 2).unwrap();
        let mut states = Vec::new();
        for a in 0..20 {
            for b in 0..20 {
                states.push(-1.0 + 2.0 * a as f64 / 19.0);
                states.push(-1.0 + 2.0 * b as f64 / 19.0);
            }
        }
        let ys = vec![0.7; 400];
        let est = ols_fit(&ys, 1, &basis, &states).unwrap();
        for x in [[-0.99, 0.3], [0.0, 0.0], [1.0, -1.0], [0.51, 0.77]] {
            assert!((est.value(&x) - 0.7).abs() < 1e-12);
        }
        assert_eq!(est.value(&[1.2, 0.0]), 0.0);
    }

    #[test]
    fn rank_deficient_and_empty_cells() {
        // One cell sees a single point, another none.
        let basis = LocalPolynomialBasis::new(1, 1.0, 1.5, 1).unwrap();
        let est = ols_fit(&[2.0], 1, &basis, &[-1.25]).unwrap();
        // Minimal-norm solution of [1, -0.25] · c = 2.
        let c = est.coefficients();
        let scale = 1.0 + 0.0625;
        assert!((c[0] - 2.0 / scale).abs() < 1e-12);
        assert!((c[1] + 0.5 / scale).abs() < 1e-12);
        assert!(c[2..].iter().all(|&v| v == 0.0));
        assert_eq!(est.cell_rows(), &[1, 0, 0]);
    }

    #[test]
    fn vector_outputs_and_truncation() {
        let basis = LocalPolynomialBasis::new(0, 1.0, 1.0, 1).unwrap();
        let xs = [-0.5, -0.4, 0.5, 0.6];
        let ys = [3.0, -5.0, 3.0, -5.0, 1.0, 0.5, 1.0, 0.5];
        let est = ols_fit(&ys, 2, &basis, &xs).unwrap().truncated(2.0).unwrap();
        let mut v = [0.0; 2];
        est.evaluate(&[-0.45], &mut v);
        assert_eq!(v, [2.0, -2.0]);
        est.evaluate(&[0.55], &mut v);
        assert_eq!(v, [1.0, 0.5]);
        assert!(est.to_csv().starts_with("cell,monomial,component,coefficient\n0,0,0,"));
    }

    #[test]
    fn rejects_non_finite_response() {
        let basis = LocalPolynomialBasis::new(0, 1.0, 1.0, 1).unwrap();
        let err = ols_fit(&[1.0, f64::NAN], 1, &basis, &[0.0, 0.1]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteResponse { row: 1 }));
    }
}
