use crate::error::{Error, Result};

/// Piecewise polynomials of total degree at most `degree` on a partition of
/// `[-R, R]^d` into cubes of edge `delta`.
///
/// On each cell the basis is made of the monomials `((x - m)/δ)^α`, where `m`
/// is the cell midpoint and `|α| <= degree`. Cells are half-open; points with
/// a coordinate equal to `R` belong to the last cell along that axis, and
/// points with `|x|_∞ > R` lie outside every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolynomialBasis {
    degree: u32,
    delta: f64,
    radius: f64,
    dim: usize,
    per_axis: usize,
    cells: usize,
    exponents: Vec<Vec<u32>>,
}

/// Largest dimension a basis may have, to keep allocation failures out.
const MAX_DIMENSION: usize = 1 << 28;

impl LocalPolynomialBasis {
    pub fn new(degree: u32, delta: f64, radius: f64, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("d", "dimension must be at least 1"));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param("delta", format!("must be positive, got {delta}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param("R", format!("must be positive, got {radius}")));
        }
        let per_axis_f = (2.0 * radius / delta).ceil();
        if per_axis_f > MAX_DIMENSION as f64 {
            return Err(Error::param("delta", "too many cells"));
        }
        // Guard against round-off making 2R/δ land just above an integer.
        let mut per_axis = per_axis_f as usize;
        if per_axis > 1 && ((per_axis - 1) as f64 * delta) >= 2.0 * radius {
            per_axis -= 1;
        }
        let per_axis = per_axis.max(1);
        let cells = (0..dim).try_fold(1usize, |acc, _| {
            acc.checked_mul(per_axis)
                .filter(|&c| c <= MAX_DIMENSION)
                .ok_or_else(|| Error::param("delta", "too many cells"))
        })?;
        let exponents = monomial_exponents(degree, dim);
        if cells.saturating_mul(exponents.len()) > MAX_DIMENSION {
            return Err(Error::param("degree", "basis dimension too large"));
        }
        Ok(Self {
            degree,
            delta,
            radius,
            dim,
            per_axis,
            cells,
            exponents,
        })
    }

    /// A single cell of degree zero containing every point of `[-R, R]^d`.
    pub fn constant(radius: f64, dim: usize) -> Result<Self> {
        Self::new(0, 2.0 * radius, radius, dim)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn cell_count(&self) -> usize {
        self.cells
    }

    /// `C(n + d, d)`.
    pub fn monomials_per_cell(&self) -> usize {
        self.exponents.len()
    }

    /// Multi-indices of the per-cell monomials, graded by total degree.
    pub fn exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    /// Total dimension `K`.
    pub fn dimension(&self) -> usize {
        self.cells * self.exponents.len()
    }

    /// Cell containing `x`, or `None` when `x` lies outside `[-R, R]^d`.
    /// Cells are numbered with the first axis most significant.
    pub fn cell_index(&self, x: &[f64]) -> Option<usize> {
        debug_assert_eq!(x.len(), self.dim);
        let mut id = 0usize;
        for &v in x {
            if !(v.abs() <= self.radius) {
                return None;
            }
            let c = (((v + self.radius) / self.delta).floor() as usize).min(self.per_axis - 1);
            id = id * self.per_axis + c;
        }
        Some(id)
    }

    pub fn cell_midpoint(&self, cell: usize) -> Vec<f64> {
        let mut mid = vec![0.0; self.dim];
        let mut rest = cell;
        for a in (0..self.dim).rev() {
            let c = rest % self.per_axis;
            rest /= self.per_axis;
            mid[a] = -self.radius + (c as f64 + 0.5) * self.delta;
        }
        mid
    }

    /// Writes the per-cell monomials of `x` (relative to `cell`) into `out`.
    pub fn local_features(&self, cell: usize, x: &[f64], out: &mut [f64]) {
        let n = self.degree as usize;
        let len = self.dim * (n + 1);
        let mut stack = [1.0; 64];
        let mut heap;
        // powers[a * (n+1) + k] = u_a^k
        let powers: &mut [f64] = if len <= stack.len() {
            &mut stack[..len]
        } else {
            heap = vec![1.0; len];
            &mut heap
        };
        let mut rest = cell;
        for a in (0..self.dim).rev() {
            let c = rest % self.per_axis;
            rest /= self.per_axis;
            let mid = -self.radius + (c as f64 + 0.5) * self.delta;
            let u = (x[a] - mid) / self.delta;
            for k in 1..=n {
                powers[a * (n + 1) + k] = powers[a * (n + 1) + k - 1] * u;
            }
        }
        for (o, alpha) in out.iter_mut().zip(&self.exponents) {
            *o = alpha
                .iter()
                .enumerate()
                .map(|(a, &k)| powers[a * (n + 1) + k as usize])
                .product();
        }
    }

    /// Full length-`K` feature vector of `x`; all zeros outside the support.
    pub fn evaluate_basis(&self, x: &[f64]) -> Vec<f64> {
        let p = self.monomials_per_cell();
        let mut v = vec![0.0; self.dimension()];
        if let Some(c) = self.cell_index(x) {
            self.local_features(c, x, &mut v[c * p..(c + 1) * p]);
        }
        v
    }
}

fn monomial_exponents(degree: u32, dim: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: u32, dim: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == dim {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(prefix, left - k, dim, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(dim), degree, dim, &mut out);
    out.sort_by_key(|a| a.iter().sum::<u32>());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_lookup() {
        let b = LocalPolynomialBasis::new(1, 1.0, 1.0, 1).unwrap();
        assert_eq!(b.cell_index(&[-0.5]), Some(0));
        assert_eq!(b.cell_index(&[0.0]), Some(1));
        assert_eq!(b.cell_index(&[1.0]), Some(1));
        assert_eq!(b.cell_index(&[-1.0]), Some(0));
        assert_eq!(b.cell_index(&[1.0 + 1e-12]), None);
        assert_eq!(b.cell_index(&[f64::NAN]), None);
    }

    #[test]
    fn dimensions() {
        let b = LocalPolynomialBasis::new(1, 1.0, 1.0, 1).unwrap();
        assert_eq!(b.dimension(), 4);
        let b = LocalPolynomialBasis::new(2, 0.5, 1.0, 3).unwrap();
        assert_eq!(b.monomials_per_cell(), 10);
        assert_eq!(b.cell_count(), 64);
        // 2R/δ not an integer: the last cell sticks out of the box.
        let b = LocalPolynomialBasis::new(0, 0.3, 1.0, 1).unwrap();
        assert_eq!(b.cells_per_axis(), 7);
        assert_eq!(b.cell_index(&[1.0]), Some(6));
    }

    #[test]
    fn constant_basis_is_single_indicator() {
        let b = LocalPolynomialBasis::new(0, 2.0, 1.0, 1).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.99, 1.0] {
            assert_eq!(b.evaluate_basis(&[x]), vec![1.0]);
        }
        assert_eq!(b.evaluate_basis(&[1.5]), vec![0.0]);
    }

    #[test]
    fn features_are_centered_and_scaled() {
        let b = LocalPolynomialBasis::new(2, 0.5, 1.0, 2).unwrap();
        let x = [0.3, -0.9];
        let c = b.cell_index(&x).unwrap();
        let mid = b.cell_midpoint(c);
        assert_eq!(mid, vec![0.25, -0.75]);
        let v = b.evaluate_basis(&x);
        let p = b.monomials_per_cell();
        let local = &v[c * p..(c + 1) * p];
        let (u0, u1): (f64, f64) = ((0.3 - 0.25) / 0.5, (-0.9 + 0.75) / 0.5);
        for (alpha, val) in b.exponents().iter().zip(local) {
            let want = u0.powi(alpha[0] as i32) * u1.powi(alpha[1] as i32);
            assert!((val - want).abs() < 1e-15);
        }
        assert_eq!(v.iter().filter(|x| **x != 0.0).count(), p);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LocalPolynomialBasis::new(1, 0.0, 1.0, 1).is_err());
        assert!(LocalPolynomialBasis::new(1, 1.0, -1.0, 1).is_err());
        assert!(LocalPolynomialBasis::new(1, 1.0, 1.0, 0).is_err());
        assert!(LocalPolynomialBasis::new(1, 1e-9, 1.0, 3).is_err());
    }
}
