//! Block completion: complete the whole matrix coarsely, cluster its rows,
//! re-complete each lower-rank block from the original observations and
//! put the rows back where they came from.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::cluster::{cluster_via_nmf, ClusterAssignment};
use crate::error::{Error, Result};
use crate::io::{ensure_dir, write_labels, write_matrix_csv, write_toml};
use crate::kmeans::KMeansSettings;
use crate::mask::Mask;
use crate::matrix::DataMatrix;
use crate::nmf::{basic_completion, masked_relative_error, SolverSettings};
use crate::seed::SeedSpec;

const STAGE_INITIAL: u64 = 1;
const STAGE_CLUSTER_NMF: u64 = 2;
const STAGE_KMEANS: u64 = 3;
const STAGE_BLOCK_BASE: u64 = 100;

/// Restriction of `mask` to `row_indices`, rows renumbered `0..len` in the given order.
pub fn derive_submask(mask: &Mask, row_indices: &[usize]) -> Result<Mask> {
    let mut seen = vec![false; mask.rows()];
    for &r in row_indices {
        if r >= mask.rows() {
            return Err(Error::Parameter(format!(
                "row {r} out of range for a mask with {} rows",
                mask.rows()
            )));
        }
        if std::mem::replace(&mut seen[r], true) {
            return Err(Error::Parameter(format!("row {r} selected twice")));
        }
    }
    let coords = row_indices.iter().enumerate().flat_map(|(new_row, &old_row)| {
        (0..mask.cols())
            .filter(move |&c| mask.contains(old_row, c))
            .map(move |c| (new_row, c))
    });
    Mask::new(row_indices.len(), mask.cols(), coords)
}

/// Places row `j` of `blocks[b]` at row `index_lists[b][j]` of the output.
pub fn reassemble(blocks: &[DataMatrix], index_lists: &[Vec<usize>], total_rows: usize) -> Result<DataMatrix> {
    if blocks.len() != index_lists.len() {
        return Err(Error::Parameter(format!(
            "{} blocks but {} index lists",
            blocks.len(),
            index_lists.len()
        )));
    }
    let cols = match blocks.iter().find(|b| b.rows() > 0) {
        Some(b) => b.cols(),
        None if total_rows == 0 => 0,
        None => return Err(Error::Parameter("no rows to reassemble".into())),
    };
    let mut placed = vec![false; total_rows];
    let mut data = vec![0.0; total_rows * cols];
    for (block, idx) in blocks.iter().zip(index_lists) {
        if block.rows() != idx.len() {
            return Err(Error::Parameter(format!(
                "block has {} rows but its index list has {}",
                block.rows(),
                idx.len()
            )));
        }
        if block.rows() > 0 && block.cols() != cols {
            return Err(Error::Dimension("blocks differ in column count".into()));
        }
        for (j, &row) in idx.iter().enumerate() {
            if row >= total_rows || std::mem::replace(&mut placed[row], true) {
                return Err(Error::Parameter(format!(
                    "index lists do not partition 0..{total_rows} (row {row})"
                )));
            }
            data[row * cols..(row + 1) * cols].copy_from_slice(block.row(j));
        }
    }
    if placed.iter().any(|p| !p) {
        return Err(Error::Parameter(format!("index lists do not cover 0..{total_rows}")));
    }
    let out = DataMatrix::new(total_rows, cols, data)?;
    if blocks.iter().all(DataMatrix::is_nonnegative) {
        out.into_nonnegative()
    } else {
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockOutcome {
    pub cluster: usize,
    pub rows: usize,
    pub observed: usize,
    /// Rank used for the block solve; `None` when the block fell back to
    /// the initial completion.
    pub rank: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CompletionReport {
    pub completed: DataMatrix,
    pub assignment: ClusterAssignment,
    pub blocks: Vec<BlockOutcome>,
    /// Whole-matrix completion the clustering ran on.
    pub initial_completion: DataMatrix,
    /// Relative error of the initial completion on the observed entries.
    pub basic_stage_error_on_observed: f64,
    pub r_full: usize,
}

impl CompletionReport {
    pub fn per_block_ranks(&self) -> Vec<Option<usize>> {
        self.blocks.iter().map(|b| b.rank).collect()
    }

    pub fn fallback_clusters(&self) -> Vec<usize> {
        self.blocks
            .iter()
            .filter(|b| b.rank.is_none())
            .map(|b| b.cluster)
            .collect()
    }

    pub fn used_fallback(&self) -> bool {
        self.blocks.iter().any(|b| b.rank.is_none())
    }

    /// Writes `completed.csv`, `labels.csv` and `report.toml` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Meta<'a> {
            rows: usize,
            cols: usize,
            k: usize,
            r_full: usize,
            basic_stage_error_on_observed: f64,
            fallback: bool,
            blocks: &'a [BlockOutcome],
        }
        ensure_dir(dir)?;
        write_matrix_csv(&dir.join("completed.csv"), &self.completed, false)?;
        write_labels(&dir.join("labels.csv"), &self.assignment.labels)?;
        write_toml(
            &dir.join("report.toml"),
            &Meta {
                rows: self.completed.rows(),
                cols: self.completed.cols(),
                k: self.assignment.k,
                r_full: self.r_full,
                basic_stage_error_on_observed: self.basic_stage_error_on_observed,
                fallback: self.used_fallback(),
                blocks: &self.blocks,
            },
        )
    }
}

/// Configuration of a block completion run.
#[derive(Debug, Clone, Copy)]
pub struct BlockCompletion {
    /// Rank for the whole-matrix completion and for the clustering NMF.
    pub r_full: usize,
    /// Rank for each block.
    pub r_block: usize,
    pub kmeans: KMeansSettings,
    pub solver: SolverSettings,
    /// Raise [`Error::DegenerateBlock`] instead of falling back when a
    /// cluster cannot be completed on its own.
    pub strict_blocks: bool,
}

impl BlockCompletion {
    pub fn run(&self, observed: &DataMatrix, mask: &Mask, seed: SeedSpec) -> Result<CompletionReport> {
        let (rows, cols) = observed.shape();
        let initial = basic_completion(observed, mask, self.r_full, &self.solver, seed.child(STAGE_INITIAL))?;
        let basic_stage_error_on_observed = masked_relative_error(&initial, observed, mask)?;

        let km = KMeansSettings {
            seed: seed.child(STAGE_KMEANS),
            ..self.kmeans
        };
        let assignment = cluster_via_nmf(&initial, self.r_full, &km, &self.solver, seed.child(STAGE_CLUSTER_NMF))?;

        let members: Vec<Vec<usize>> = (0..assignment.k).map(|c| assignment.members(c)).collect();
        let solved: Vec<Result<(DataMatrix, BlockOutcome)>> = members
            .par_iter()
            .enumerate()
            .map(|(cluster, idx)| {
                let submask = derive_submask(mask, idx)?;
                let mut outcome = BlockOutcome {
                    cluster,
                    rows: idx.len(),
                    observed: submask.len(),
                    rank: None,
                };
                let degenerate = submask.is_empty() || idx.len() < self.r_block || cols < self.r_block;
                if degenerate {
                    if self.strict_blocks {
                        return Err(Error::DegenerateBlock {
                            cluster,
                            rows: idx.len(),
                            observed: submask.len(),
                        });
                    }
                    if !idx.is_empty() {
                        log::warn!(
                            "cluster {cluster} ({} rows, {} observed) falls back to the initial completion",
                            idx.len(),
                            submask.len()
                        );
                    }
                    return Ok((initial.select_rows(idx)?, outcome));
                }
                // Block built from observed entries only.
                let mut block = DataMatrix::zeros(idx.len(), cols);
                for &(i, j) in submask.coords() {
                    block.set(i, j, observed.get(idx[i], j));
                }
                let seed = seed.child(STAGE_BLOCK_BASE + cluster as u64);
                let completed = basic_completion(&block, &submask, self.r_block, &self.solver, seed)?;
                outcome.rank = Some(self.r_block);
                Ok((completed, outcome))
            })
            .collect();

        let mut blocks = Vec::with_capacity(solved.len());
        let mut outcomes = Vec::with_capacity(solved.len());
        for s in solved {
            let (b, o) = s?;
            blocks.push(b);
            outcomes.push(o);
        }
        let completed = reassemble(&blocks, &members, rows)?;
        Ok(CompletionReport {
            completed,
            assignment,
            blocks: outcomes,
            initial_completion: initial,
            basic_stage_error_on_observed,
            r_full: self.r_full,
        })
    }
}

/// Block completion with the default degenerate-block fallback.
pub fn block_completion(
    observed: &DataMatrix,
    mask: &Mask,
    r_full: usize,
    r_block: usize,
    km: &KMeansSettings,
    solver: &SolverSettings,
    seed: SeedSpec,
) -> Result<CompletionReport> {
    BlockCompletion {
        r_full,
        r_block,
        kmeans: *km,
        solver: *solver,
        strict_blocks: false,
    }
    .run(observed, mask, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::bernoulli_mask;
    use crate::matrix::{relative_error, uniform_random_matrix};

    #[test]
    fn submask_examples() {
        let mask = bernoulli_mask(6, 4, 0.5, SeedSpec::new(1, 1)).unwrap();
        assert_eq!(derive_submask(&mask, &(0..6).collect::<Vec<_>>()).unwrap(), mask);
        let empty = derive_submask(&mask, &[]).unwrap();
        assert_eq!((empty.rows(), empty.len()), (0, 0));
        assert!(derive_submask(&mask, &[6]).is_err());
        assert!(derive_submask(&mask, &[1, 1]).is_err());

        let a = [0, 2, 5];
        let b = [1, 3, 4];
        let mut union: Vec<(usize, usize)> = Vec::new();
        for idx in [&a[..], &b[..]] {
            let sub = derive_submask(&mask, idx).unwrap();
            union.extend(sub.coords().iter().map(|&(r, c)| (idx[r], c)));
        }
        assert_eq!(Mask::new(6, 4, union).unwrap(), mask);
    }

    #[test]
    fn reassemble_examples() {
        let m = uniform_random_matrix(6, 3, SeedSpec::new(2, 2)).unwrap();
        let all: Vec<usize> = (0..6).collect();
        assert_eq!(reassemble(std::slice::from_ref(&m), &[all], 6).unwrap(), m);

        let even = vec![0, 2, 4];
        let odd = vec![1, 3, 5];
        let blocks = [m.select_rows(&even).unwrap(), m.select_rows(&odd).unwrap()];
        let back = reassemble(&blocks, &[even.clone(), odd.clone()], 6).unwrap();
        assert_eq!(back.as_slice(), m.as_slice());
        for (b, idx) in blocks.iter().zip([&even, &odd]) {
            for (j, &row) in idx.iter().enumerate() {
                assert_eq!(back.row(row), b.row(j));
            }
        }

        assert!(reassemble(&blocks, &[vec![0, 2, 4], vec![1, 3, 3]], 6).is_err());
        assert!(reassemble(&blocks, &[vec![0, 2, 4], vec![1, 3, 6]], 6).is_err());
        assert!(reassemble(&blocks, &[vec![0, 2], vec![1, 3, 5]], 6).is_err());
    }

    fn two_block_truth(seed: u64) -> DataMatrix {
        let s = SeedSpec::new(seed, 0);
        let a = uniform_random_matrix(40, 3, s.child(1))
            .unwrap()
            .matmul(&uniform_random_matrix(3, 30, s.child(2)).unwrap())
            .unwrap();
        let b = uniform_random_matrix(40, 3, s.child(3))
            .unwrap()
            .matmul(&uniform_random_matrix(3, 30, s.child(4)).unwrap())
            .unwrap();
        DataMatrix::vstack(&[&a, &b]).unwrap()
    }

    #[test]
    fn initial_stage_matches_standalone_basic_completion() {
        let truth = two_block_truth(3);
        let mask = bernoulli_mask(80, 30, 0.6, SeedSpec::new(3, 9)).unwrap();
        let solver = SolverSettings::with_iters(60);
        let seed = SeedSpec::new(3, 4);
        let report = block_completion(&truth, &mask, 6, 3, &KMeansSettings::new(2, seed), &solver, seed).unwrap();
        let standalone = basic_completion(&truth, &mask, 6, &solver, seed.child(STAGE_INITIAL)).unwrap();
        assert_eq!(report.initial_completion, standalone);
        assert_eq!(report.completed.shape(), (80, 30));
        assert!(report.completed.min_entry().unwrap() >= 0.0);
        assert!(relative_error(&report.completed, &truth).unwrap() < 0.5);
    }

    #[test]
    fn unobserved_entries_are_never_read() {
        let truth = two_block_truth(5);
        let mask = bernoulli_mask(80, 30, 0.5, SeedSpec::new(5, 1)).unwrap();
        let solver = SolverSettings::with_iters(40);
        let km = KMeansSettings::new(2, SeedSpec::new(5, 2));
        let seed = SeedSpec::new(5, 3);
        let base = block_completion(&truth, &mask, 6, 3, &km, &solver, seed).unwrap();
        let mut flipped = truth.clone();
        let (i, j) = (0..80)
            .flat_map(|i| (0..30).map(move |j| (i, j)))
            .find(|&(i, j)| !mask.contains(i, j))
            .unwrap();
        flipped.set(i, j, 1234.5);
        let other = block_completion(&flipped, &mask, 6, 3, &km, &solver, seed).unwrap();
        assert_eq!(base.completed.as_slice(), other.completed.as_slice());
        assert_eq!(base.assignment, other.assignment);
    }

    #[test]
    fn degenerate_block_falls_back_or_errors() {
        // Rows 0..3 have no observations at all; with r_block larger than a
        // tiny cluster the block cannot be solved on its own.
        let truth = two_block_truth(7);
        let mask = bernoulli_mask(80, 30, 0.7, SeedSpec::new(7, 1)).unwrap();
        let cfg = BlockCompletion {
            r_full: 6,
            r_block: 3,
            kmeans: KMeansSettings::new(3, SeedSpec::new(7, 2)),
            solver: SolverSettings::with_iters(30),
            strict_blocks: false,
        };
        let report = cfg.run(&truth, &mask, SeedSpec::new(7, 3)).unwrap();
        assert_eq!(report.completed.shape(), (80, 30));
        let strict = BlockCompletion {
            r_block: 45,
            strict_blocks: true,
            ..cfg
        };
        assert!(matches!(
            strict.run(&truth, &mask, SeedSpec::new(7, 3)),
            Err(Error::DegenerateBlock { .. })
        ));
        let lenient = BlockCompletion {
            r_block: 45,
            ..cfg
        };
        let report = lenient.run(&truth, &mask, SeedSpec::new(7, 3)).unwrap();
        assert!(report.used_fallback());
        assert_eq!(report.fallback_clusters().len(), 3);
        assert_eq!(report.completed, report.initial_completion);
    }

    #[test]
    fn report_directory_layout() {
        let truth = two_block_truth(8);
        let mask = Mask::full(80, 30);
        let seed = SeedSpec::new(8, 0);
        let report = block_completion(
            &truth,
            &mask,
            6,
            3,
            &KMeansSettings::new(2, seed),
            &SolverSettings::with_iters(20),
            seed,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.write_to_dir(dir.path()).unwrap();
        for f in ["completed.csv", "labels.csv", "report.toml"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let meta: toml::Value = crate::io::read_toml(&dir.path().join("report.toml")).unwrap();
        assert_eq!(meta["r_full"].as_integer(), Some(6));
        assert_eq!(meta["blocks"].as_array().unwrap().len(), 2);
    }
}
