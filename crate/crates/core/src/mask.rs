//! Observation masks: explicit sets of observed `(row, col)` positions.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::SeedSpec;

/// Set of observed positions of a `rows × cols` matrix.
///
/// Coordinates are kept sorted in row-major order alongside a dense
/// membership table, so lookups are O(1) and iteration order is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    observed: Vec<(usize, usize)>,
    member: Vec<bool>,
}

impl Mask {
    /// Builds a mask, rejecting out-of-bounds or duplicate coordinates.
    pub fn new(rows: usize, cols: usize, coords: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut member = vec![false; rows * cols];
        for (r, c) in coords {
            if r >= rows || c >= cols {
                return Err(Error::Parameter(format!(
                    "mask coordinate ({r}, {c}) out of bounds for {rows}x{cols}"
                )));
            }
            let slot = &mut member[r * cols + c];
            if *slot {
                return Err(Error::Parameter(format!("duplicate mask coordinate ({r}, {c})")));
            }
            *slot = true;
        }
        Ok(Self::from_membership(rows, cols, member))
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Self::from_membership(rows, cols, vec![true; rows * cols])
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Self::from_membership(rows, cols, vec![false; rows * cols])
    }

    fn from_membership(rows: usize, cols: usize, member: Vec<bool>) -> Self {
        let observed = member
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(idx, _)| (idx / cols, idx % cols))
            .collect();
        Self {
            rows,
            cols,
            observed,
            member,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    #[inline]
    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols && self.member[row * self.cols + col]
    }

    /// Observed coordinates in row-major order.
    pub fn coords(&self) -> &[(usize, usize)] {
        &self.observed
    }

    /// Row-major membership table of length `rows × cols`.
    pub fn membership(&self) -> &[bool] {
        &self.member
    }

    /// Fraction of observed positions; 0 for a mask with no positions.
    pub fn density(&self) -> f64 {
        let total = self.rows * self.cols;
        if total == 0 {
            0.0
        } else {
            self.observed.len() as f64 / total as f64
        }
    }

    pub fn observed_in_row(&self, row: usize) -> usize {
        self.member[row * self.cols..(row + 1) * self.cols]
            .iter()
            .filter(|&&m| m)
            .count()
    }
}

/// Each position observed independently with probability `p`.
///
/// Positions are visited in row-major order with one uniform draw each, so
/// for a fixed seed the masks are nested: `p₁ ≤ p₂` implies `Ω₁ ⊆ Ω₂`.
pub fn bernoulli_mask(rows: usize, cols: usize, p: f64, seed: SeedSpec) -> Result<Mask> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("sampling rate {p} outside [0, 1]")));
    }
    let mut rng = seed.rng();
    let member = (0..rows * cols).map(|_| rng.random::<f64>() < p).collect();
    Ok(Mask::from_membership(rows, cols, member))
}
