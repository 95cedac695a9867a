use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{CsrMatrix, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub max_abs_err: f64,
    /// Largest `|x - y| / |y|` over elements with `y != 0`.
    pub max_rel_err: f64,
    pub mismatch_count: usize,
    pub pass: bool,
}

/// Element passes when `|x - y| <= abs_tol + rel_tol * |y|`. NaN never passes.
pub fn compare(x: &DenseMatrix, y: &DenseMatrix, rel_tol: f64, abs_tol: f64) -> Result<ComparisonReport> {
    if x.shape() != y.shape() {
        return Err(Error::DimensionMismatch(format!(
            "comparing {:?} with {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(compare_slices(x.data(), y.data(), rel_tol, abs_tol))
}

/// Same rule over the stored values of two matrices with identical patterns.
pub fn compare_sparse(x: &CsrMatrix, y: &CsrMatrix, rel_tol: f64, abs_tol: f64) -> Result<ComparisonReport> {
    if !x.same_pattern(y) {
        return Err(Error::DimensionMismatch("sparsity patterns differ".into()));
    }
    Ok(compare_slices(x.values(), y.values(), rel_tol, abs_tol))
}

fn compare_slices(x: &[f32], y: &[f32], rel_tol: f64, abs_tol: f64) -> ComparisonReport {
    let mut max_abs_err = 0.0f64;
    let mut max_rel_err = 0.0f64;
    let mut mismatch_count = 0;
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a as f64, b as f64);
        let err = (a - b).abs();
        if !(err <= abs_tol + rel_tol * b.abs()) {
            mismatch_count += 1;
        }
        if err.is_nan() {
            max_abs_err = f64::NAN;
            continue;
        }
        max_abs_err = max_abs_err.max(err);
        if b != 0.0 {
            max_rel_err = max_rel_err.max(err / b.abs());
        }
    }
    ComparisonReport {
        max_abs_err,
        max_rel_err,
        mismatch_count,
        pass: mismatch_count == 0,
    }
}
