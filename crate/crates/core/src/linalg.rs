use nalgebra::{DMatrix, DVector};

/// Dense LU solve; `None` when the matrix is numerically singular.
pub(crate) fn solve_dense(a: DMatrix<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(b);
    let x = a.lu().solve(&rhs)?;
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
