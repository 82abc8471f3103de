//! Dense row-major matrices and the error metrics built on them.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Dense row-major real matrix.
///
/// The `nonnegative` tag is a construction-time promise: tagged matrices
/// were validated to have no negative entry, and operations that cannot
/// break that (products of tagged matrices, row selection) keep the tag.
#[derive(Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    nonnegative: bool,
}

impl fmt::Debug for DataMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "DataMatrix {}x{}{}",
            self.rows,
            self.cols,
            if self.nonnegative { " (nonnegative)" } else { "" }
        )?;
        for i in 0..self.rows.min(8) {
            let row = self.row(i);
            let shown: Vec<String> = row.iter().take(8).map(|v| format!("{v:.4}")).collect();
            writeln!(f, "  [{}{}]", shown.join(", "), if row.len() > 8 { ", ..." } else { "" })?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}

impl DataMatrix {
    /// Untagged matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            nonnegative: false,
        })
    }

    /// Matrix validated to be entrywise nonnegative.
    pub fn nonnegative(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, data)?.into_nonnegative()
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            nonnegative: true,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Validates and sets the nonnegativity tag.
    pub fn into_nonnegative(mut self) -> Result<Self> {
        if let Some(idx) = self.data.iter().position(|v| !(*v >= 0.0)) {
            return Err(Error::Negative {
                row: idx / self.cols.max(1),
                col: idx % self.cols.max(1),
                value: self.data[idx],
            });
        }
        self.nonnegative = true;
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.nonnegative
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access drops the nonnegativity tag.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        self.nonnegative = false;
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    /// Writes one entry; a negative value drops the nonnegativity tag.
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        if !(value >= 0.0) {
            self.nonnegative = false;
        }
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn min_entry(&self) -> Option<f64> {
        self.data.iter().copied().reduce(f64::min)
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data: out,
            nonnegative: self.nonnegative,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
            nonnegative: self.nonnegative && c >= 0.0,
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Self::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = Self::new(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        )?;
        out.nonnegative = self.nonnegative && other.nonnegative;
        Ok(out)
    }

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        gemm_nn(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        out.nonnegative = self.nonnegative && other.nonnegative;
        Ok(out)
    }

    pub fn trace(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::Dimension("trace of a non-square matrix".into()));
        }
        Ok((0..self.rows).map(|i| self.get(i, i)).sum())
    }

    /// Rows in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Parameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self {
            rows: indices.len(),
            cols: self.cols,
            data,
            nonnegative: self.nonnegative,
        })
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&Self]) -> Result<Self> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::Dimension("vstack of matrices with different widths".into()));
        }
        let data: Vec<f64> = parts.iter().flat_map(|m| m.data.iter().copied()).collect();
        Ok(Self {
            rows: parts.iter().map(|m| m.rows).sum(),
            cols,
            data,
            nonnegative: parts.iter().all(|m| m.nonnegative),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>, nonnegative: bool) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self {
            rows,
            cols,
            data,
            nonnegative,
        }
    }

    pub(crate) fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self::from_parts(rows, cols, data, false)
    }
}

/// `c += a · b` with `a` m×k, `b` k×n, all row-major.
pub(crate) fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for (p, &aip) in a[i * k..(i + 1) * k].iter().enumerate() {
            if aip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += aip * bv;
            }
        }
    }
}

/// `c += aᵀ · b` with `a` k×m, `b` k×n.
pub(crate) fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], k: usize, m: usize, n: usize) {
    for p in 0..k {
        let a_row = &a[p * m..(p + 1) * m];
        let b_row = &b[p * n..(p + 1) * n];
        for (i, &api) in a_row.iter().enumerate() {
            if api == 0.0 {
                continue;
            }
            let c_row = &mut c[i * n..(i + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += api * bv;
            }
        }
    }
}

/// `c += a · bᵀ` with `a` m×k, `b` n×k.
pub(crate) fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let b_row = &b[j * k..(j + 1) * k];
            let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            c[i * n + j] += dot;
        }
    }
}

pub fn frobenius_norm(m: &DataMatrix) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Dimension("Frobenius norm of an empty matrix".into()));
    }
    Ok(m.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// `‖estimate − truth‖_F / ‖truth‖_F`.
pub fn relative_error(estimate: &DataMatrix, truth: &DataMatrix) -> Result<f64> {
    let diff = estimate.sub(truth)?;
    let denom = frobenius_norm(truth)?;
    if denom == 0.0 {
        return Err(Error::Degenerate("relative error against a zero matrix".into()));
    }
    Ok(frobenius_norm(&diff)? / denom)
}

/// I.i.d. uniform entries on [0, 1), tagged nonnegative.
pub fn uniform_random_matrix(rows: usize, cols: usize, seed: SeedSpec) -> Result<DataMatrix> {
    uniform_matrix_with(rows, cols, &mut seed.rng())
}

pub(crate) fn uniform_matrix_with<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Result<DataMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter(format!(
            "random matrix needs positive dimensions, got {rows}x{cols}"
        )));
    }
    let dist = Uniform::new(0.0, 1.0).expect("valid range");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Ok(DataMatrix::from_parts(rows, cols, data, true))
}

pub(crate) fn gaussian_matrix_with<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DataMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DataMatrix::from_parts(rows, cols, data, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frobenius_examples() {
        assert_eq!(frobenius_norm(&DataMatrix::zeros(2, 2)).unwrap(), 0.0);
        assert_eq!(frobenius_norm(&DataMatrix::identity(2)).unwrap(), 2f64.sqrt());
        let m = DataMatrix::new(1, 2, vec![3.0, 4.0]).unwrap();
        assert_eq!(frobenius_norm(&m).unwrap(), 5.0);
        assert!(matches!(
            frobenius_norm(&DataMatrix::zeros(0, 3)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn relative_error_examples() {
        let t = DataMatrix::new(2, 2, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
        assert_eq!(relative_error(&DataMatrix::zeros(2, 2), &t).unwrap(), 1.0);
        let one = DataMatrix::new(1, 1, vec![2.0]).unwrap();
        let est = DataMatrix::new(1, 1, vec![1.0]).unwrap();
        assert_eq!(relative_error(&est, &one).unwrap(), 0.5);
        assert!(matches!(
            relative_error(&one, &DataMatrix::zeros(1, 1)),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            relative_error(&one, &DataMatrix::zeros(1, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn nonnegative_tag_reports_offending_index() {
        let err = DataMatrix::nonnegative(2, 2, vec![0.0, 1.0, -0.5, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Negative { row: 1, col: 0, .. }));
    }

    #[test]
    fn uniform_matrix_contract() {
        let a = uniform_random_matrix(100, 80, SeedSpec::new(9, 1)).unwrap();
        let b = uniform_random_matrix(100, 80, SeedSpec::new(9, 1)).unwrap();
        assert_eq!(a, b);
        assert!(a.is_nonnegative());
        assert!(a.as_slice().iter().all(|v| (0.0..1.0).contains(v)));
        let mean = a.as_slice().iter().sum::<f64>() / 8000.0;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
        assert!(matches!(
            uniform_random_matrix(0, 3, SeedSpec::new(1, 1)),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn products_agree() {
        let a = DataMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = DataMatrix::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let ab = a.matmul(&b).unwrap();
        assert_eq!(ab.as_slice(), &[58.0, 64.0, 139.0, 154.0]);

        let mut c = vec![0.0; 4];
        gemm_tn(a.transpose().as_slice(), b.as_slice(), &mut c, 3, 2, 2);
        assert_eq!(c, ab.as_slice());
        let mut c = vec![0.0; 4];
        gemm_nt(a.as_slice(), b.transpose().as_slice(), &mut c, 2, 3, 2);
        assert_eq!(c, ab.as_slice());
    }

    proptest! {
        #[test]
        fn frobenius_is_absolutely_homogeneous(
            data in proptest::collection::vec(-10.0f64..10.0, 12),
            c in -5.0f64..5.0,
        ) {
            let m = DataMatrix::new(3, 4, data).unwrap();
            let lhs = frobenius_norm(&m.scale(c)).unwrap();
            let rhs = c.abs() * frobenius_norm(&m).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn relative_error_scale_invariant(
            a in proptest::collection::vec(0.0f64..10.0, 6),
            b in proptest::collection::vec(0.1f64..10.0, 6),
            c in 0.01f64..100.0,
        ) {
            let a = DataMatrix::new(2, 3, a).unwrap();
            let b = DataMatrix::new(2, 3, b).unwrap();
            let e1 = relative_error(&a, &b).unwrap();
            let e2 = relative_error(&a.scale(c), &b.scale(c)).unwrap();
            prop_assert!((e1 - e2).abs() <= 1e-12 * (1.0 + e1));
        }
    }
}
