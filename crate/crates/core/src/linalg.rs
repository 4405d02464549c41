use nalgebra::{DMatrix, DVector};

use crate::error::{PlrError, Result};

/// Ratio of extreme singular values; `inf` for a singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn solve(m: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let b = DVector::from_column_slice(rhs);
    m.clone()
        .lu()
        .solve(&b)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| PlrError::SingularOperator("linear solve failed".into()))
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
