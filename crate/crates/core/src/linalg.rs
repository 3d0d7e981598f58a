//! Small dense matrix helpers (L <= 19, so everything is dense and exact-ish).

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

/// 2-norm condition number, sigma_max / sigma_min.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse via LU with partial pivoting. `k` labels the pilot index in the
/// error when the matrix is too ill-conditioned.
pub fn checked_inverse(m: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("cannot invert a {}x{} matrix", m.nrows(), m.ncols())));
    }
    let condition = condition_number(m);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularMatrix { k, condition });
    }
    m.clone().lu().try_inverse().ok_or(Error::SingularMatrix { k, condition })
}

/// ||a - b||_F / ||b||_F
pub fn relative_frobenius_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
