//! Synthetic two-subspace data: random nonnegative subspaces, rotations by
//! `exp(tA)`, the correlation measure `α(U, V) = tr(P_U P_V) / r`, and the
//! block datasets built from them.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_exponential, singular_values};
use crate::matrix::{gaussian_matrix_with, uniform_matrix_with, DataMatrix};
use crate::seed::SeedSpec;

/// Full-row-rank check: smallest singular value must exceed this times the largest.
pub const RANK_TOL: f64 = 1e-10;
/// Rotated entries in `[-ENTRY_TOL, 0)` are rounding noise and clamp to 0.
pub const ENTRY_TOL: f64 = 1e-12;
/// Gram matrices with a larger condition number use the SVD projector.
pub const GRAM_COND_LIMIT: f64 = 1e12;

/// An `r`-dimensional subspace of `Rⁿ` represented by `r` nonnegative,
/// linearly independent basis rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DataMatrix,
}

impl Subspace {
    pub fn new(basis_rows: DataMatrix) -> Result<Self> {
        let (r, n) = basis_rows.shape();
        if r == 0 || r > n {
            return Err(Error::Parameter(format!(
                "subspace basis must be r x n with 1 <= r <= n, got {r}x{n}"
            )));
        }
        let basis = basis_rows.into_nonnegative()?;
        let sv = singular_values(&basis);
        let (max, min) = (sv[0], sv[sv.len() - 1]);
        if !(min > RANK_TOL * max) {
            return Err(Error::Degenerate(format!(
                "basis rows are rank deficient (sigma_min = {min:e}, sigma_max = {max:e})"
            )));
        }
        Ok(Self { basis })
    }

    /// Subspace spanned by the standard basis vectors `e_i` for `i` in `coords`.
    pub fn coordinate(n: usize, coords: impl IntoIterator<Item = usize>) -> Result<Self> {
        let coords: Vec<usize> = coords.into_iter().collect();
        let mut b = DataMatrix::zeros(coords.len(), n);
        for (row, &c) in coords.iter().enumerate() {
            if c >= n {
                return Err(Error::Parameter(format!("coordinate {c} out of range for n = {n}")));
            }
            b.set(row, c, 1.0);
        }
        Self::new(b)
    }

    pub fn basis_rows(&self) -> &DataMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.cols()
    }
}

/// What to do with negative entries produced by a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeEntries {
    /// Entries below `-ENTRY_TOL` are an error.
    #[default]
    Reject,
    /// Every negative entry is set to zero.
    Clamp,
}

impl FromStr for NegativeEntries {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(Self::Reject),
            "clamp" => Ok(Self::Clamp),
            other => Err(Error::Config(format!("unknown negative-entry policy {other:?}"))),
        }
    }
}

/// `A = (G − Gᵀ)/2` for a standard Gaussian `G`.
pub fn random_skew_symmetric(n: usize, seed: SeedSpec) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::Parameter("skew-symmetric matrix needs n >= 1".into()));
    }
    let g = gaussian_matrix_with(n, n, &mut seed.rng());
    let mut a = DataMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (g.get(i, j) - g.get(j, i)) / 2.0;
            a.set(i, j, v);
            a.set(j, i, -v);
        }
    }
    Ok(a)
}

fn check_skew(a: &DataMatrix) -> Result<()> {
    let (n, c) = a.shape();
    if n != c {
        return Err(Error::Dimension("rotation generator must be square".into()));
    }
    for i in 0..n {
        for j in i..n {
            if (a.get(i, j) + a.get(j, i)).abs() > 1e-12 {
                return Err(Error::Parameter(format!("generator is not skew-symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn rotated_rows(u: &Subspace, t: f64, a: &DataMatrix) -> Result<DataMatrix> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Parameter(format!("rotation parameter t = {t} must be finite and >= 0")));
    }
    check_skew(a)?;
    if a.rows() != u.ambient_dim() {
        return Err(Error::Dimension(format!(
            "generator is {}x{} but the subspace lives in R^{}",
            a.rows(),
            a.cols(),
            u.ambient_dim()
        )));
    }
    let q = matrix_exponential(&a.scale(t))?;
    u.basis.matmul(&q)
}

/// `V = U · exp(tA)`, with negative entries handled per `policy`.
pub fn rotate_subspace(u: &Subspace, t: f64, a: &DataMatrix, policy: NegativeEntries) -> Result<Subspace> {
    let mut rows = rotated_rows(u, t, a)?;
    let cols = rows.cols();
    if policy == NegativeEntries::Reject {
        if let Some((idx, &value)) = rows
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| **v < -ENTRY_TOL)
        {
            return Err(Error::RotationTooLarge {
                row: idx / cols,
                col: idx % cols,
                value,
                tol: ENTRY_TOL,
            });
        }
    }
    for v in rows.as_mut_slice() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Subspace::new(rows)
}

/// Largest `t` for which `U · exp(tA)` has no entry below `-ENTRY_TOL`,
/// found by doubling then bisection.
pub fn max_feasible_t(u: &Subspace, a: &DataMatrix) -> Result<f64> {
    let feasible = |t: f64| -> Result<bool> {
        Ok(rotated_rows(u, t, a)?.min_entry().unwrap_or(0.0) >= -ENTRY_TOL)
    };
    let (mut lo, mut hi) = (0.0, 1e-6);
    while feasible(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(lo);
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Orthogonal projector `Bᵀ(BBᵀ)⁻¹B` onto the row space of the basis.
pub fn orthogonal_projector(s: &Subspace) -> DataMatrix {
    projector_of_rows(s.basis_rows()).expect("subspace bases have full row rank")
}

/// Projector onto the row space of a full-row-rank matrix.
pub fn projector_of_rows(b: &DataMatrix) -> Result<DataMatrix> {
    let (r, n) = b.shape();
    let bm = b.to_nalgebra();
    let gram = &bm * bm.transpose();
    let gsv = gram.singular_values();
    let (gmax, gmin) = (gsv.max(), gsv.min());
    let p: DMatrix<f64> = if gmin > 0.0 && gmax / gmin <= GRAM_COND_LIMIT {
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::Degenerate("Gram matrix is not positive definite".into()))?;
        bm.transpose() * chol.solve(&bm)
    } else {
        // Ill-conditioned Gram matrix: orthonormal basis from the SVD instead.
        let svd = bm.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > RANK_TOL * smax)
            .collect();
        if keep.len() < r {
            return Err(Error::Degenerate(format!(
                "basis has numerical rank {} < {r}",
                keep.len()
            )));
        }
        let mut p = DMatrix::<f64>::zeros(n, n);
        for &k in &keep {
            let row = v_t.row(k);
            p += row.transpose() * row;
        }
        p
    };
    let sym = (&p + p.transpose()) * 0.5;
    Ok(DataMatrix::from_nalgebra(&sym))
}

/// `α(U, V) = tr(P_U P_V) / r`.
pub fn correlation_measure(u: &Subspace, v: &Subspace) -> Result<f64> {
    if u.dim() != v.dim() || u.ambient_dim() != v.ambient_dim() {
        return Err(Error::Parameter(format!(
            "correlation needs equal dimensions: {}-dim in R^{} vs {}-dim in R^{}",
            u.dim(),
            u.ambient_dim(),
            v.dim(),
            v.ambient_dim()
        )));
    }
    let pu = orthogonal_projector(u);
    let pv = orthogonal_projector(v);
    // Both projectors are symmetric, so tr(P_U P_V) is the entrywise inner product.
    let tr: f64 = pu.as_slice().iter().zip(pv.as_slice()).map(|(a, b)| a * b).sum();
    Ok(tr / u.dim() as f64)
}

/// Parameters of the two-block synthetic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockModel {
    /// Rows per block.
    pub m: usize,
    /// Ambient dimension.
    pub n: usize,
    /// Dimension of each generating subspace.
    pub r: usize,
    /// Rotation parameter.
    pub t: f64,
    pub permute: bool,
    pub negatives: NegativeEntries,
}

#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    /// `2m × n` data matrix (rows permuted when requested).
    pub x: DataMatrix,
    /// Generating subspace of each row of `x`: 0 for U, 1 for V.
    pub true_labels: Vec<usize>,
    /// Row `i` of `x` is row `permutation[i]` of the unpermuted concatenation.
    pub permutation: Vec<usize>,
    pub u: Subspace,
    pub v: Subspace,
    pub t: f64,
    pub alpha: f64,
}

const TAG_U: u64 = 1;
const TAG_GENERATOR: u64 = 2;
const TAG_COEFF_U: u64 = 3;
const TAG_COEFF_V: u64 = 4;
const TAG_PERMUTATION: u64 = 5;

/// Random subspace and rotation generator a dataset with `seed` uses.
///
/// These depend only on `(n, r, seed)`, never on `t`, so a sweep over `t`
/// with a fixed seed rotates one subspace by one generator.
pub fn model_generators(n: usize, r: usize, seed: SeedSpec) -> Result<(Subspace, DataMatrix)> {
    if r == 0 || r > n {
        return Err(Error::Parameter(format!("need 1 <= r <= n, got r = {r}, n = {n}")));
    }
    let u = Subspace::new(uniform_matrix_with(r, n, &mut seed.child(TAG_U).rng())?)?;
    let a = random_skew_symmetric(n, seed.child(TAG_GENERATOR))?;
    Ok((u, a))
}

/// U from uniform entries, `V = U·exp(tA)`, blocks `C_U·U` and `C_V·V`
/// with uniform `m × r` coefficients, stacked and optionally row-permuted.
pub fn generate_block_dataset(model: &BlockModel, seed: SeedSpec) -> Result<SyntheticDataset> {
    if model.m == 0 {
        return Err(Error::Parameter("block size m must be positive".into()));
    }
    let (u, a) = model_generators(model.n, model.r, seed)?;
    let v = rotate_subspace(&u, model.t, &a, model.negatives)?;
    let mut ds = assemble_block_dataset(&u, &v, model.m, model.permute, seed)?;
    ds.t = model.t;
    Ok(ds)
}

/// Block dataset from explicitly given subspaces.
pub fn assemble_block_dataset(
    u: &Subspace,
    v: &Subspace,
    m: usize,
    permute: bool,
    seed: SeedSpec,
) -> Result<SyntheticDataset> {
    let alpha = correlation_measure(u, v)?;
    let r = u.dim();
    let cu = uniform_matrix_with(m, r, &mut seed.child(TAG_COEFF_U).rng())?;
    let cv = uniform_matrix_with(m, r, &mut seed.child(TAG_COEFF_V).rng())?;
    let stacked = DataMatrix::vstack(&[&cu.matmul(u.basis_rows())?, &cv.matmul(v.basis_rows())?])?;
    let labels: Vec<usize> = (0..2 * m).map(|i| usize::from(i >= m)).collect();

    let mut permutation: Vec<usize> = (0..2 * m).collect();
    if permute {
        permutation.shuffle(&mut seed.child(TAG_PERMUTATION).rng());
    }
    let x = stacked.select_rows(&permutation)?;
    let true_labels = permutation.iter().map(|&i| labels[i]).collect();
    Ok(SyntheticDataset {
        x,
        true_labels,
        permutation,
        u: u.clone(),
        v: v.clone(),
        t: 0.0,
        alpha,
    })
}
