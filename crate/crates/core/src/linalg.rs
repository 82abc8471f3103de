//! Small dense linear-algebra helpers.

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Maximum absolute column sum.
pub fn one_norm(a: &DataMatrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a.get(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 1/2, the
/// Taylor series is summed until the next term no longer changes the sum
/// at machine precision, and the result is squared `s` times.
pub fn matrix_exponential(a: &DataMatrix) -> Result<DataMatrix> {
    let (n, cols) = a.shape();
    if n != cols {
        return Err(Error::Dimension(format!("exponential of a non-square {n}x{cols} matrix")));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::Data("exponential of a non-finite matrix".into()));
    }
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings));

    let mut sum = DataMatrix::identity(n);
    let mut term = DataMatrix::identity(n);
    for k in 1..=40 {
        term = term.matmul(&scaled)?.scale(1.0 / k as f64);
        let term_norm = one_norm(&term);
        sum = sum.add(&term)?;
        if term_norm <= f64::EPSILON * one_norm(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    Ok(sum)
}

/// Singular values in decreasing order.
pub fn singular_values(a: &DataMatrix) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.to_nalgebra().singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values above `rel_tol × σ_max`.
pub fn numerical_rank(a: &DataMatrix, rel_tol: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&max) if max > 0.0 => sv.iter().filter(|&&s| s > rel_tol * max).count(),
        _ => 0,
    }
}
