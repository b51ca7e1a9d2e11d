//! Local polynomial spaces on cube partitions and the empirical
//! least-squares projection onto them.

mod basis;
mod ols;

pub use basis::LocalPolynomialBasis;
pub use ols::{clamp, min_norm_solve, ols_fit, LocalPolynomialEstimator};
